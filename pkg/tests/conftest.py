from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from splatlab.core import ImageBuffer
from splatlab.splat import GaussianPrimitive, GaussianScene


def random_quaternion(rng) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def random_scene(rng, n: int, sh_degree: int = 0, spread: float = 1.0) -> GaussianScene:
    """Scene in front of an identity camera at z in [2, 6]."""
    n_coeffs = (sh_degree + 1) ** 2
    prims = []
    for _ in range(n):
        prims.append(
            GaussianPrimitive(
                center=np.array(
                    [rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(2.0, 6.0)]
                ),
                rotation=random_quaternion(rng),
                scale=rng.uniform(0.02, 0.4, size=3),
                opacity=float(rng.uniform(0.05, 1.0)),
                sh_coeffs=rng.uniform(-1.0, 1.0, size=(n_coeffs, 3)),
                source_view=int(rng.integers(0, 2)),
            )
        )
    return GaussianScene(tuple(prims), sh_degree=sh_degree)


def random_image(rng, width: int = 16, height: int = 12) -> ImageBuffer:
    return ImageBuffer(rng.random((height, width, 3)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
