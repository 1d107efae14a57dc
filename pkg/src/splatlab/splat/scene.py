"""Canonical-frame Gaussian scene representation, fusion, and view dropping."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ValidationError
from ..rng import keyed_bernoulli


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True, eq=False)
class GaussianPrimitive:
    """One anisotropic Gaussian: center, rotation+scale covariance factors,
    opacity, per-channel SH color coefficients, and a source-view tag."""

    center: np.ndarray
    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    scale: np.ndarray  # per-axis std-dev, > 0
    opacity: float
    sh_coeffs: np.ndarray  # ((L+1)^2, 3)
    source_view: int = 0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(3)
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        scale = np.asarray(self.scale, dtype=np.float64).reshape(3)
        sh = np.asarray(self.sh_coeffs, dtype=np.float64)
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValidationError("rotation quaternion is not unit length within 1e-6")
        if np.any(scale <= 0):
            raise ValidationError("scales must be > 0")
        if not 0.0 <= self.opacity <= 1.0:
            raise ValidationError("opacity must lie in [0, 1]")
        if sh.ndim != 2 or sh.shape[1] != 3 or sh.shape[0] < 1:
            raise ValidationError(f"sh_coeffs must be (n_coeffs, 3) with degree 0 present, got {sh.shape}")
        for name, arr in (("center", center), ("rotation", q), ("scale", scale), ("sh_coeffs", sh)):
            if not np.isfinite(arr).all():
                raise ValidationError(f"{name} contains non-finite values")
            arr.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "sh_coeffs", sh)

    def covariance(self) -> np.ndarray:
        """Sigma = R diag(s^2) R^T; symmetric positive definite by construction."""
        r = quaternion_to_matrix(self.rotation)
        return r @ np.diag(self.scale**2) @ r.T


@dataclass(frozen=True, eq=False)
class GaussianScene:
    primitives: tuple[GaussianPrimitive, ...] = field(default=())
    sh_degree: int = 1  # "low-order" default; degree 0 accepted everywhere

    def __post_init__(self):
        prims = tuple(self.primitives)
        expected = 3 * (self.sh_degree + 1) ** 2
        for i, g in enumerate(prims):
            if g.sh_coeffs.size != expected:
                raise ValidationError(
                    f"primitive {i}: {g.sh_coeffs.size} SH values, scene degree {self.sh_degree} "
                    f"requires {expected}"
                )
        object.__setattr__(self, "primitives", prims)

    def __len__(self) -> int:
        return len(self.primitives)


def fuse_scenes(scenes: Sequence[GaussianScene]) -> GaussianScene:
    """Concatenate per-view scenes in a shared canonical frame.

    Pure concatenation: every primitive keeps its attributes and source_view
    tag, so rendering the fusion equals rendering the manually merged list.
    """
    if not scenes:
        raise ValidationError("fuse_scenes requires at least one scene")
    degrees = {s.sh_degree for s in scenes}
    if len(degrees) != 1:
        raise ValidationError(f"sh_degree mismatch across scenes: {sorted(degrees)}")
    merged = []
    for s in scenes:
        merged.extend(s.primitives)
    return GaussianScene(tuple(merged), sh_degree=scenes[0].sh_degree)


def drop_view(scene: GaussianScene, view: int, p: float, seed: int) -> GaussianScene:
    """With probability p (one Bernoulli draw keyed by seed), remove every
    primitive tagged with the given source view; otherwise return the scene
    unchanged."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError("drop probability must lie in [0, 1]")
    if not keyed_bernoulli(p, seed, view):
        return scene
    kept = tuple(g for g in scene.primitives if g.source_view != view)
    return GaussianScene(kept, sh_degree=scene.sh_degree)
