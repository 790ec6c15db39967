"""Seeded pseudo-randomness.

All stochastic behaviour in the package flows from explicit 64-bit seeds
through one of two routes:

* a counter-based splitmix64 stream for parameter initialization, where
  per-name derivation keeps layer seeds independent of construction order;
* ``numpy.random.Generator(PCG64(seed))`` for bulk draws (noise fields,
  scene content), with per-item seeds derived via :func:`derive_seed`.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 values (scalar or array)."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *parts: int | str) -> int:
    """Deterministically fold salt values into a seed.

    Strings are hashed FNV-1a style so per-parameter streams depend on the
    name, not on creation order.
    """
    state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        for part in parts:
            if isinstance(part, str):
                h = np.uint64(0xCBF29CE484222325)
                for byte in part.encode("utf-8"):
                    h = (h ^ np.uint64(byte)) * np.uint64(0x100000001B3)
                salt = h
            else:
                salt = np.uint64(int(part) & 0xFFFFFFFFFFFFFFFF)
            state = _mix64((state + _GOLDEN) ^ salt)
    return int(state)


def uniform64(seed: int, n: int) -> np.ndarray:
    """First ``n`` doubles in [0, 1) of the splitmix64 stream for ``seed``."""
    with np.errstate(over="ignore"):
        idx = np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN + np.uint64(
            seed & 0xFFFFFFFFFFFFFFFF
        )
    bits = _mix64(idx)
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def uniform(seed: int, shape, low: float, high: float, dtype=np.float32) -> np.ndarray:
    """Uniform array in [low, high) drawn from the splitmix64 stream."""
    n = int(np.prod(shape)) if shape else 1
    u = uniform64(seed, n)
    return (low + (high - low) * u).astype(dtype).reshape(shape)


def generator(seed: int, *parts: int | str) -> np.random.Generator:
    """PCG64 generator keyed by ``seed`` and optional salts."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *parts) if parts else seed))
