"""Deterministic randomness.

Two sources, both seedable and platform-independent:

* Perturbation draws (the epsilon streams) use counter-based SplitMix64: the
  value at counter i is the SplitMix64 finalizer applied to
  seed + (i+1)*GOLDEN (64-bit wrapping). Pure integer arithmetic plus exact
  power-of-two float scaling, so every platform and both kernel backends
  produce identical bits.
* Gaussian sampling for the synthetic testbed uses numpy's Philox generator
  (also counter-based; numpy pins its streams).

derive_seed gives the documented substream rule: callers that parallelize
over batches derive one child seed per batch tag.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MASK64 = 0xFFFFFFFFFFFFFFFF

MODE_UNIFORM = "uniform"
MODE_RADEMACHER = "rademacher"


def _as_u64(seed: int) -> int:
    """Two's-complement fold of an arbitrary Python int into [0, 2^64)."""
    return int(seed) & _MASK64


def _mix64(z: np.uint64) -> np.uint64:
    with np.errstate(over="ignore"):
        z = np.uint64(z)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, tag: int) -> int:
    """Child seed for substream `tag`: mix(seed XOR mix((tag+1)*GOLDEN))."""
    with np.errstate(over="ignore"):
        salted = _mix64((np.uint64(_as_u64(tag)) + np.uint64(1)) * _GOLDEN)
        return int(_mix64(np.uint64(_as_u64(seed)) ^ salted))


def draw_epsilon(mode: str, seed: int, rows: int, cols: int, start: int = 0) -> np.ndarray:
    """rows x cols epsilon matrix, row-major counter order starting at `start`.

    uniform: open interval (-1, 1), |eps| <= 1 - 2**-52.
    rademacher: exactly ±1.0.
    """
    n = rows * cols
    if mode == MODE_UNIFORM:
        flat = _kernels.uniform_block(_as_u64(seed), _as_u64(start), n)
    elif mode == MODE_RADEMACHER:
        flat = _kernels.rademacher_block(_as_u64(seed), _as_u64(start), n)
    else:
        raise ValueError(f"unknown epsilon mode: {mode!r}")
    return flat.reshape(rows, cols)


def gaussian_generator(seed: int) -> np.random.Generator:
    """Philox-backed generator for testbed gaussians."""
    return np.random.Generator(np.random.Philox(_as_u64(seed)))
