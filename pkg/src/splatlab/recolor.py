"""Region-wise recoloring with cross-view consistency.

Each region gets one composite color transform whose parameters are sampled
once (keyed by seed and region ID, never by frame) and reused on every frame.
Frames are synthesized by soft-blending the per-region transformed images with
the original, after renormalizing overlapping soft masks.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from .core import ImageBuffer
from .errors import ValidationError
from .masks import TrackedMaskSet
from .rng import keyed_bernoulli, keyed_index, keyed_log_uniform, keyed_normal, keyed_uniform_range

_PERMUTATIONS = tuple(itertools.permutations((0, 1, 2)))
_LUMA = np.array([0.299, 0.587, 0.114])  # ITU-R BT.601

# parameter-slot indices for the keyed generator
_SLOT_BRIGHTNESS, _SLOT_CONTRAST, _SLOT_SATURATION, _SLOT_HUE = 0, 1, 2, 3
_SLOT_GAMMA, _SLOT_PCA, _SLOT_PERM, _SLOT_GRAY = 4, 5, 6, 7


@dataclass(frozen=True)
class RecolorParams:
    """One region's composite transform: jitter factors, gamma, PCA lighting,
    channel permutation, optional grayscale."""

    brightness_factor: float = 1.0
    contrast_factor: float = 1.0
    saturation_factor: float = 1.0
    hue_shift: float = 0.0
    gamma: float = 1.0
    pca_alphas: tuple[float, float, float] = (0.0, 0.0, 0.0)
    channel_perm: tuple[int, int, int] = (0, 1, 2)
    grayscale: bool = False

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValidationError("gamma must be > 0")
        for name in ("brightness_factor", "contrast_factor", "saturation_factor"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")
        if not -0.5 <= self.hue_shift <= 0.5:
            raise ValidationError("hue_shift must lie in [-0.5, 0.5]")
        if tuple(sorted(self.channel_perm)) != (0, 1, 2):
            raise ValidationError(f"channel_perm {self.channel_perm} is not a permutation of (0, 1, 2)")

    def is_identity(self) -> bool:
        return (
            self.brightness_factor == 1.0
            and self.contrast_factor == 1.0
            and self.saturation_factor == 1.0
            and self.hue_shift == 0.0
            and self.gamma == 1.0
            and all(a == 0.0 for a in self.pca_alphas)
            and self.channel_perm == (0, 1, 2)
            and not self.grayscale
        )

    def digest(self) -> str:
        payload = json.dumps(
            {
                "brightness": self.brightness_factor,
                "contrast": self.contrast_factor,
                "saturation": self.saturation_factor,
                "hue": self.hue_shift,
                "gamma": self.gamma,
                "pca": list(self.pca_alphas),
                "perm": list(self.channel_perm),
                "gray": self.grayscale,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class AugmentationConfig:
    """Sampling ranges for RecolorParams. Defaults are wide enough to change
    an object's identity-level color; every entry is configurable."""

    brightness: tuple[float, float] = (0.6, 1.4)
    contrast: tuple[float, float] = (0.6, 1.4)
    saturation: tuple[float, float] = (0.6, 1.4)
    hue: tuple[float, float] = (-0.3, 0.3)
    gamma: tuple[float, float] = (0.5, 2.0)  # log-uniform
    pca_mean: float = 0.0
    pca_std: float = 0.1
    permute_prob: float = 1.0  # uniform over all 6 permutations when it fires
    grayscale_prob: float = 0.1

    def __post_init__(self):
        for name in ("brightness", "contrast", "saturation", "gamma"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValidationError(f"{name} range must satisfy 0 < min <= max")
        lo, hi = self.hue
        if not (-0.5 <= lo <= hi <= 0.5):
            raise ValidationError("hue range must satisfy -0.5 <= min <= max <= 0.5")
        if self.pca_std < 0:
            raise ValidationError("pca_std must be >= 0")
        for name in ("permute_prob", "grayscale_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")

    @staticmethod
    def identity() -> "AugmentationConfig":
        return AugmentationConfig(
            brightness=(1.0, 1.0),
            contrast=(1.0, 1.0),
            saturation=(1.0, 1.0),
            hue=(0.0, 0.0),
            gamma=(1.0, 1.0),
            pca_std=0.0,
            permute_prob=0.0,
            grayscale_prob=0.0,
        )

    @staticmethod
    def from_json(obj: Mapping) -> "AugmentationConfig":
        """Parse the wire form: {min,max} per range, {mean,std} for PCA, {prob} for toggles."""
        kwargs = {}
        for name in ("brightness", "contrast", "saturation", "hue", "gamma"):
            if name in obj:
                kwargs[name] = (float(obj[name]["min"]), float(obj[name]["max"]))
        if "pca" in obj:
            kwargs["pca_mean"] = float(obj["pca"].get("mean", 0.0))
            kwargs["pca_std"] = float(obj["pca"]["std"])
        if "permutation" in obj:
            kwargs["permute_prob"] = float(obj["permutation"]["prob"])
        if "grayscale" in obj:
            kwargs["grayscale_prob"] = float(obj["grayscale"]["prob"])
        return AugmentationConfig(**kwargs)

    def to_json(self) -> dict:
        return {
            "brightness": {"min": self.brightness[0], "max": self.brightness[1]},
            "contrast": {"min": self.contrast[0], "max": self.contrast[1]},
            "saturation": {"min": self.saturation[0], "max": self.saturation[1]},
            "hue": {"min": self.hue[0], "max": self.hue[1]},
            "gamma": {"min": self.gamma[0], "max": self.gamma[1]},
            "pca": {"mean": self.pca_mean, "std": self.pca_std},
            "permutation": {"prob": self.permute_prob},
            "grayscale": {"prob": self.grayscale_prob},
        }


@dataclass(frozen=True, eq=False)
class RegionRecolorJob:
    """One region's sampled params plus its soft masks keyed by frame index."""

    region_id: int
    params: RecolorParams
    masks: Mapping[int, np.ndarray] = field(default_factory=dict)


def sample_params(seed: int, region_id: int, aug_cfg: AugmentationConfig | None = None) -> RecolorParams:
    """Draw RecolorParams as a pure function of (seed, region_id).

    Each parameter slot consumes its own keyed counter, so the result is
    independent of frame count, call order, and thread schedule.
    """
    cfg = aug_cfg if aug_cfg is not None else AugmentationConfig()
    alphas = tuple(
        keyed_normal(cfg.pca_mean, cfg.pca_std, seed, region_id, _SLOT_PCA, axis) for axis in range(3)
    )
    if keyed_bernoulli(cfg.permute_prob, seed, region_id, _SLOT_PERM, 0):
        perm = _PERMUTATIONS[keyed_index(len(_PERMUTATIONS), seed, region_id, _SLOT_PERM, 1)]
    else:
        perm = (0, 1, 2)
    return RecolorParams(
        brightness_factor=keyed_uniform_range(*cfg.brightness, seed, region_id, _SLOT_BRIGHTNESS),
        contrast_factor=keyed_uniform_range(*cfg.contrast, seed, region_id, _SLOT_CONTRAST),
        saturation_factor=keyed_uniform_range(*cfg.saturation, seed, region_id, _SLOT_SATURATION),
        hue_shift=keyed_uniform_range(*cfg.hue, seed, region_id, _SLOT_HUE),
        gamma=keyed_log_uniform(*cfg.gamma, seed, region_id, _SLOT_GAMMA),
        pca_alphas=alphas,
        channel_perm=perm,
        grayscale=keyed_bernoulli(cfg.grayscale_prob, seed, region_id, _SLOT_GRAY),
    )


def _pca_lighting_offset(pixels: np.ndarray, alphas: Sequence[float]) -> np.ndarray:
    """Constant RGB offset sum(alpha_i * eigval_i * eigvec_i) from the image's
    RGB covariance; eigenpairs sorted by descending eigenvalue with a
    sign-canonicalized basis so results are platform-stable."""
    flat = pixels.reshape(-1, 3)
    if flat.shape[0] < 2:
        return np.zeros(3)
    cov = np.cov(flat, rowvar=False)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    for i in range(3):
        pivot = np.argmax(np.abs(evecs[:, i]))
        if evecs[pivot, i] < 0:
            evecs[:, i] = -evecs[:, i]
    offset = np.zeros(3)
    for i in range(3):
        offset += alphas[i] * evals[i] * evecs[:, i]
    return offset


def apply_transform(img: ImageBuffer, p: RecolorParams) -> ImageBuffer:
    """Apply the composite transform: brightness, contrast, saturation, hue,
    gamma, PCA lighting offset, channel permutation, optional grayscale.

    The four jitter stages clamp to [0, 1] like standard ColorJitter (which
    also keeps the HSV conversion and gamma well-defined); the PCA offset may
    overshoot and is handled by the final clamp.
    """
    a = img.data.copy()
    if p.brightness_factor != 1.0:
        a = np.clip(a * p.brightness_factor, 0.0, 1.0)
    if p.contrast_factor != 1.0:
        mean_gray = float((a @ _LUMA).mean())
        a = np.clip((a - mean_gray) * p.contrast_factor + mean_gray, 0.0, 1.0)
    if p.saturation_factor != 1.0:
        luma = (a @ _LUMA)[..., None]
        a = np.clip(luma + p.saturation_factor * (a - luma), 0.0, 1.0)
    if p.hue_shift != 0.0:
        hsv = rgb_to_hsv(a)
        hsv[..., 0] = (hsv[..., 0] + p.hue_shift) % 1.0
        a = hsv_to_rgb(hsv)
    if p.gamma != 1.0:
        a = a**p.gamma
    if any(x != 0.0 for x in p.pca_alphas):
        a = a + _pca_lighting_offset(a, p.pca_alphas)
    if p.channel_perm != (0, 1, 2):
        a = a[..., list(p.channel_perm)]  # output channel i takes input channel perm[i]
    if p.grayscale:
        a = np.repeat((a @ _LUMA)[..., None], 3, axis=-1)
    return ImageBuffer(np.clip(a, 0.0, 1.0))


def renormalize_masks(masks: Sequence[np.ndarray], eps: float = 1e-6) -> list[np.ndarray]:
    """Divide by (sum + eps) only at pixels where the mask sum exceeds one.

    Pixels whose total weight stays <= 1 keep their weights; the remainder of
    the blend there goes to the original image. Idempotent.
    """
    if not masks:
        return []
    shape = np.asarray(masks[0]).shape
    arrs = []
    for m in masks:
        m = np.asarray(m, dtype=np.float64)
        if m.shape != shape:
            raise ValidationError(f"mask shape {m.shape} does not match {shape}")
        arrs.append(m)
    total = np.sum(arrs, axis=0)
    scale = np.where(total > 1.0, total + eps, 1.0)
    return [m / scale for m in arrs]


def blend_frame(
    img: ImageBuffer,
    jobs: Sequence[RegionRecolorJob],
    frame_index: int,
    eps: float = 1e-6,
) -> ImageBuffer:
    """Soft-blend per-region transformed images over the original.

    out = sum_r w_r * transform_r(img) + (1 - sum_r w_r) * img, with w_r the
    renormalized soft masks. A single full-weight region reduces to plain
    alpha blending with its transform.
    """
    masks = []
    for job in jobs:
        if frame_index not in job.masks:
            raise ValidationError(f"region {job.region_id} has no mask for frame {frame_index}")
        m = np.asarray(job.masks[frame_index], dtype=np.float64)
        if m.shape != (img.height, img.width):
            raise ValidationError(
                f"region {job.region_id}, frame {frame_index}: mask shape {m.shape} "
                f"does not match image {(img.height, img.width)}"
            )
        masks.append(m)
    if not jobs:
        return ImageBuffer(img.data.copy())
    weights = renormalize_masks(masks, eps)
    out = (1.0 - np.sum(weights, axis=0))[..., None] * img.data
    for job, w in zip(jobs, weights):
        out += w[..., None] * apply_transform(img, job.params).data
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def build_jobs(
    tracked: Sequence[TrackedMaskSet],
    seed: int,
    aug_cfg: AugmentationConfig | None = None,
) -> list[RegionRecolorJob]:
    """Sample params once per region ID appearing anywhere in the sequence."""
    region_ids = sorted(set().union(*[t.object_ids for t in tracked])) if tracked else []
    jobs = []
    for rid in region_ids:
        masks = {t.frame_index: t.masks[rid] for t in tracked if rid in t.object_ids}
        jobs.append(RegionRecolorJob(region_id=rid, params=sample_params(seed, rid, aug_cfg), masks=masks))
    return jobs


def recolor_sequence(
    frames: Sequence[ImageBuffer],
    tracked: Sequence[TrackedMaskSet],
    seed: int,
    aug_cfg: AugmentationConfig | None = None,
    eps: float = 1e-6,
    threads: int = 1,
) -> list[ImageBuffer]:
    """Recolor a sequence of accepted frames with shared per-region params.

    frames[i] pairs with tracked[i]; every tracked frame must carry
    accepted=True (run accept_frames first and drop the skips). Output order
    and content are independent of `threads`.
    """
    if len(frames) != len(tracked):
        raise ValidationError(f"{len(frames)} frames but {len(tracked)} tracked mask sets")
    for i, t in enumerate(tracked):
        if not t.accepted:
            raise ValidationError(f"tracked frame at position {i} (frame_index {t.frame_index}) is not accepted")
    jobs = build_jobs(tracked, seed, aug_cfg)

    def render(i: int) -> ImageBuffer:
        fidx = tracked[i].frame_index
        frame_jobs = [j for j in jobs if fidx in j.masks]
        return blend_frame(frames[i], frame_jobs, fidx, eps)

    if threads <= 1 or len(frames) <= 1:
        return [render(i) for i in range(len(frames))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(render, range(len(frames))))
