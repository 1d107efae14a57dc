"""Counter-based deterministic random values.

Every random decision in the toolkit is a pure function of an integer key
tuple (seed, object id, slot, ...), so results never depend on call order,
thread schedule, or process state. The mixer is the splitmix64 finalizer
folded over the key parts.
"""
from __future__ import annotations

import hashlib
import math

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def hash_key(*parts: int) -> int:
    """Fold integer key parts into a single 64-bit hash."""
    acc = 0x243F6A8885A308D3
    for p in parts:
        acc = _splitmix64(acc ^ (int(p) & _MASK64))
    return acc


def hash_str(s: str) -> int:
    """Stable 64-bit key for a string (independent of PYTHONHASHSEED)."""
    digest = hashlib.sha256(s.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def keyed_uniform(*parts: int) -> float:
    """Uniform float in [0, 1) keyed by the given integers."""
    return (hash_key(*parts) >> 11) * 2.0**-53


def keyed_uniform_range(lo: float, hi: float, *parts: int) -> float:
    return lo + (hi - lo) * keyed_uniform(*parts)


def keyed_log_uniform(lo: float, hi: float, *parts: int) -> float:
    """Log-uniform draw over [lo, hi]; requires lo > 0."""
    return math.exp(keyed_uniform_range(math.log(lo), math.log(hi), *parts))


def keyed_normal(mean: float, std: float, *parts: int) -> float:
    """Gaussian draw via Box-Muller; exact `mean` when std == 0."""
    u1 = keyed_uniform(*parts, 0)
    u2 = keyed_uniform(*parts, 1)
    # u1 < 1 so log1p(-u1) is finite; u1 == 0 gives z == 0.
    z = math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)
    return mean + std * z


def keyed_index(n: int, *parts: int) -> int:
    """Uniform integer in [0, n)."""
    return min(int(keyed_uniform(*parts) * n), n - 1)


def keyed_bernoulli(p: float, *parts: int) -> bool:
    return keyed_uniform(*parts) < p


def spawn_generator(*parts: int) -> np.random.Generator:
    """numpy Generator seeded from the key; for subsampling without replacement."""
    return np.random.Generator(np.random.PCG64(hash_key(*parts)))
