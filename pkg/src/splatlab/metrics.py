"""Benchmark metrics over ingested feature sets.

Fréchet distance uses sample statistics with the unbiased (N-1) covariance
and evaluates the matrix square root through the symmetric product
S = Cx^(1/2) Cy Cx^(1/2), whose eigenvalues are clamped at zero. Kernel MMD
uses the unbiased estimator with the degree-3 polynomial kernel
k(a, b) = (a.b / d + 1)^3, averaged over seeded subsamples. "Scene
conditioned" means: compute per scene, then average over scenes.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .core import FeatureSet
from .errors import ValidationError
from .rng import hash_str, spawn_generator


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, FeatureSet):
        return np.asarray(x.vectors, dtype=np.float64)
    return np.atleast_2d(np.asarray(x, dtype=np.float64))


def clip_t2i(prompt_embedding: np.ndarray, image_embeddings) -> float:
    """Mean cosine similarity between one prompt vector and each image vector."""
    p = np.asarray(prompt_embedding, dtype=np.float64).ravel()
    imgs = _as_matrix(image_embeddings)
    if imgs.shape[1] != p.shape[0]:
        raise ValidationError(f"dim mismatch: prompt {p.shape[0]}, images {imgs.shape[1]}")
    pn = np.linalg.norm(p)
    norms = np.linalg.norm(imgs, axis=1)
    if pn == 0.0 or np.any(norms == 0.0):
        raise ValidationError("cosine similarity undefined for a zero vector")
    return float(np.mean(imgs @ p / (norms * pn)))


def frechet_distance(x, y) -> float:
    """||mu_x - mu_y||^2 + Tr(Cx + Cy - 2 (Cx Cy)^(1/2))."""
    xa, ya = _as_matrix(x), _as_matrix(y)
    if xa.shape[1] != ya.shape[1]:
        raise ValidationError(f"feature dim mismatch: {xa.shape[1]} vs {ya.shape[1]}")
    if xa.shape[0] < 2 or ya.shape[0] < 2:
        raise ValidationError("frechet_distance requires at least 2 samples per set")
    mu_x, mu_y = xa.mean(axis=0), ya.mean(axis=0)
    cov_x = np.atleast_2d(np.cov(xa, rowvar=False))
    cov_y = np.atleast_2d(np.cov(ya, rowvar=False))
    evals_x, evecs_x = np.linalg.eigh(cov_x)
    root_x = evecs_x @ np.diag(np.sqrt(np.clip(evals_x, 0.0, None))) @ evecs_x.T
    inner = root_x @ cov_y @ root_x
    inner = 0.5 * (inner + inner.T)
    evals_inner = np.linalg.eigvalsh(inner)
    trace_sqrt = float(np.sqrt(np.clip(evals_inner, 0.0, None)).sum())
    diff = mu_x - mu_y
    value = float(diff @ diff + np.trace(cov_x) + np.trace(cov_y) - 2.0 * trace_sqrt)
    # the distance is non-negative; cancellation can leave ~1e-8 dust below zero
    return max(value, 0.0)


def polynomial_kernel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Degree-3 polynomial kernel with 1/dim scaling and unit offset."""
    d = a.shape[1]
    return (a @ b.T / d + 1.0) ** 3


def mmd2_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    """Unbiased MMD^2: within-set sums exclude the diagonal; may be negative."""
    m, n = x.shape[0], y.shape[0]
    kxx = polynomial_kernel(x, x)
    kyy = polynomial_kernel(y, y)
    kxy = polynomial_kernel(x, y)
    sum_xx = kxx.sum() - np.trace(kxx)
    sum_yy = kyy.sum() - np.trace(kyy)
    return float(sum_xx / (m * (m - 1)) + sum_yy / (n * (n - 1)) - 2.0 * kxy.mean())


def kernel_mmd(x, y, subset_size: int = 100, n_subsets: int = 10, seed: int = 0) -> float:
    """Average unbiased MMD^2 over seeded without-replacement subsamples."""
    xa, ya = _as_matrix(x), _as_matrix(y)
    if xa.shape[1] != ya.shape[1]:
        raise ValidationError(f"feature dim mismatch: {xa.shape[1]} vs {ya.shape[1]}")
    if subset_size < 2:
        raise ValidationError("subset_size must be >= 2")
    if n_subsets < 1:
        raise ValidationError("n_subsets must be >= 1")
    if xa.shape[0] < subset_size or ya.shape[0] < subset_size:
        raise ValidationError(
            f"sets too small for subset_size {subset_size}: {xa.shape[0]} and {ya.shape[0]} samples"
        )
    values = []
    for t in range(n_subsets):
        ix = spawn_generator(seed, t, 0).choice(xa.shape[0], size=subset_size, replace=False)
        iy = spawn_generator(seed, t, 1).choice(ya.shape[0], size=subset_size, replace=False)
        values.append(mmd2_unbiased(xa[ix], ya[iy]))
    return float(np.mean(values))


def scene_conditioned_metrics(
    per_scene: Mapping[str, tuple[FeatureSet, FeatureSet]],
    subset_size: int = 100,
    n_subsets: int = 10,
    seed: int = 0,
    pooled: bool = False,
) -> tuple[float, float]:
    """(c_fid, c_kid): per-scene Fréchet distance and kernel MMD, averaged.

    KID subset size is clamped to the scene's smaller side so small scenes stay
    measurable. With pooled=True the per-scene sets are concatenated and the
    metrics computed once over the pool instead.
    """
    if not per_scene:
        raise ValidationError("no scenes given")
    for scene_id, pair in per_scene.items():
        if pair[0] is None or pair[1] is None:
            raise ValidationError(f"scene {scene_id} is missing a feature set")
    if pooled:
        rendered = np.vstack([_as_matrix(pair[0]) for pair in per_scene.values()])
        reference = np.vstack([_as_matrix(pair[1]) for pair in per_scene.values()])
        size = min(subset_size, rendered.shape[0], reference.shape[0])
        return frechet_distance(rendered, reference), kernel_mmd(
            rendered, reference, subset_size=size, n_subsets=n_subsets, seed=seed
        )
    fids, kids = [], []
    for scene_id in sorted(per_scene):
        rendered, reference = per_scene[scene_id]
        ra, fa = _as_matrix(rendered), _as_matrix(reference)
        fids.append(frechet_distance(ra, fa))
        size = min(subset_size, ra.shape[0], fa.shape[0])
        kids.append(kernel_mmd(ra, fa, subset_size=size, n_subsets=n_subsets, seed=seed ^ hash_str(scene_id)))
    return float(np.mean(fids)), float(np.mean(kids))
