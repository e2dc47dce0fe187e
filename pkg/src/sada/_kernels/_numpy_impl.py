"""Pure-numpy twin of the compiled kernels.

Every function here must stay bit-identical to sada._kernels._fast: same
SplitMix64 integer pipeline (uint64 arithmetic wraps identically), same
float op order, no fused multiply-adds.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG52 = 2.0**-52


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _states(seed: int, start: int, n: int) -> np.ndarray:
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(np.uint64(seed) + idx * _GOLDEN)


def uniform_block(seed: int, start: int, n: int) -> np.ndarray:
    """n doubles in the open interval (-1, 1): (2k+1)/2^52 - 1, k = top 52 bits."""
    with np.errstate(over="ignore"):
        k = (_states(seed, start, n) >> np.uint64(12)).astype(np.float64)
    return (2.0 * k + 1.0) * _TWO_NEG52 - 1.0


def rademacher_block(seed: int, start: int, n: int) -> np.ndarray:
    """n doubles drawn from {-1.0, +1.0}, sign taken from the top state bit."""
    top = _states(seed, start, n) >> np.uint64(63)
    return np.where(top == np.uint64(1), 1.0, -1.0)


def apply_shift(base: np.ndarray, eps: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """base + eps * scale with scale broadcast across rows (mul then add)."""
    return base + eps * scale[np.newaxis, :]
