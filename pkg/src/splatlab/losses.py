"""Training-loss suite: pixel MSE, embedding distances, Smooth-L1 center
anchoring, pairwise Chamfer-L1 view consistency, and the weighted total.

The semantic and perceptual terms are plain distances over externally
computed feature vectors; no encoder runs here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .core import ImageBuffer
from .errors import ValidationError
from .rng import spawn_generator


@dataclass(frozen=True)
class LossWeights:
    clip: float = 0.5
    lpips: float = 0.8
    mse: float = 1.0
    center: float = 0.01
    geom: float = 0.03

    def __post_init__(self):
        if any(w < 0 for w in (self.clip, self.lpips, self.mse, self.center, self.geom)):
            raise ValidationError("loss weights must be >= 0")


@dataclass(frozen=True)
class LossReport:
    clip: float
    lpips: float
    mse: float
    center: float
    geom: float
    total: float

    def to_json(self) -> dict:
        return {
            "clip": self.clip,
            "lpips": self.lpips,
            "mse": self.mse,
            "center": self.center,
            "geom": self.geom,
            "total": self.total,
        }


def mse_loss(a: ImageBuffer, b: ImageBuffer) -> float:
    if a.data.shape != b.data.shape:
        raise ValidationError(f"image size mismatch: {a.data.shape} vs {b.data.shape}")
    return float(np.mean((a.data - b.data) ** 2))


def embedding_distance(a: np.ndarray, b: np.ndarray, kind: str = "cosine_loss") -> float:
    """cosine_loss = 1 - cos(a, b); l2 = mean squared difference."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"embedding dim mismatch: {a.shape} vs {b.shape}")
    if kind == "cosine_loss":
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            raise ValidationError("cosine distance undefined for a zero vector")
        return float(1.0 - np.dot(a, b) / (na * nb))
    if kind == "l2":
        return float(np.mean((a - b) ** 2))
    raise ValidationError(f"unknown embedding distance kind {kind!r}")


def smooth_l1_centers(pred: np.ndarray, ref: np.ndarray, beta: float = 1.0) -> float:
    """Mean over all coordinates of the Huber penalty with threshold beta."""
    if beta <= 0:
        raise ValidationError("beta must be > 0")
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValidationError(f"point-set cardinality mismatch: {pred.shape} vs {ref.shape}")
    d = np.abs(pred - ref)
    per_coord = np.where(d < beta, 0.5 * d * d / beta, d - 0.5 * beta)
    return float(per_coord.mean())


def chamfer_l1(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric sum of directed mean nearest-neighbor L1 distances."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValidationError("chamfer_l1 requires non-empty point sets")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"point dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    dists = cdist(a, b, metric="cityblock")
    return float(dists.min(axis=1).mean() + dists.min(axis=0).mean())


def subsample_points(points: np.ndarray, sample_size: int, seed: int) -> np.ndarray:
    """Seeded subsample without replacement; whole set when it is small enough.

    Keyed by (seed, set size) rather than by caller position: equal sets then
    receive equal subsamples, which keeps the consistency loss exactly zero
    for identical views under any seed.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if sample_size >= n:
        return points
    idx = spawn_generator(seed, n).choice(n, size=sample_size, replace=False)
    return points[idx]


def geom_consistency_loss(
    per_view_centers: Sequence[np.ndarray],
    sample_size: int = 1024,
    seed: int = 0,
) -> float:
    """Pairwise Chamfer-L1 over seeded center subsamples, scaled by 1/(V(V-1)).

    The normalization is applied exactly as configured even though the i<j sum
    has V(V-1)/2 terms.
    """
    v = len(per_view_centers)
    if v < 2:
        raise ValidationError("geom_consistency_loss requires at least two views")
    samples = [subsample_points(c, sample_size, seed) for c in per_view_centers]
    total = 0.0
    for i in range(v):
        for j in range(i + 1, v):
            total += chamfer_l1(samples[i], samples[j])
    return total / (v * (v - 1))


def _mean_term(value) -> float:
    if np.isscalar(value):
        return float(value)
    arr = np.asarray(value, dtype=np.float64)
    if arr.size == 0:
        return 0.0
    return float(arr.mean())


def total_loss(
    clip=0.0,
    lpips=0.0,
    mse=0.0,
    center: float = 0.0,
    geom: float = 0.0,
    weights: LossWeights | None = None,
) -> LossReport:
    """Weighted sum of the five terms; per-view image terms are averaged first."""
    w = weights if weights is not None else LossWeights()
    terms = {
        "clip": _mean_term(clip),
        "lpips": _mean_term(lpips),
        "mse": _mean_term(mse),
        "center": float(center),
        "geom": float(geom),
    }
    for name, value in terms.items():
        if not math.isfinite(value):
            raise ValidationError(f"loss term {name} is not finite")
    total = (
        w.clip * terms["clip"]
        + w.lpips * terms["lpips"]
        + w.mse * terms["mse"]
        + w.center * terms["center"]
        + w.geom * terms["geom"]
    )
    return LossReport(total=total, **terms)
