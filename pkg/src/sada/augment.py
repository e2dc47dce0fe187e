"""Closed-form semantic-preserving text augmentation.

Perturbs text embeddings inside their conditional variance envelope:

    e' = e + eps ⊙ beta * d(C_ss|r)

with eps drawn per row and per dimension, either uniform on (-1, 1) or
Rademacher (±1, which pins the shift to the envelope boundary). beta scales
the sampling range. Dimensions with zero conditional variance are never
perturbed. Draws come from the counter-based stream in sada.rng, so identical
(batch, diagonals, spec) triples reproduce identical bytes on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, rng
from .covariance import ConditionalDiagonals
from .errors import DimMismatch, StepsTooSmall

MODE_UNIFORM = rng.MODE_UNIFORM
MODE_RADEMACHER = rng.MODE_RADEMACHER


@dataclass(frozen=True)
class AugmentationSpec:
    beta: float
    mode: str = MODE_UNIFORM
    seed: int = 0

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.mode not in (MODE_UNIFORM, MODE_RADEMACHER):
            raise ValueError(f"mode must be 'uniform' or 'rademacher', got {self.mode!r}")


@dataclass
class AugmentedBatch:
    original: np.ndarray
    augmented: np.ndarray
    epsilon: np.ndarray
    spec: AugmentationSpec

    def delta(self, cond: ConditionalDiagonals) -> np.ndarray:
        """The applied perturbation eps ⊙ beta*d, recomputed exactly."""
        scale = self.spec.beta * cond.require_ss_given_r()
        return self.epsilon * scale[np.newaxis, :]

    def verify(self, cond: ConditionalDiagonals) -> bool:
        """Reconstruction identity: augmented == original + eps ⊙ beta*d."""
        if self.spec.beta == 0.0:
            return bool(np.all(self.augmented == self.original))
        scale = self.spec.beta * cond.require_ss_given_r()
        rebuilt = _kernels.apply_shift(self.original, self.epsilon, scale)
        return bool(np.all(rebuilt == self.augmented))


def augment(batch: np.ndarray, cond: ConditionalDiagonals, spec: AugmentationSpec) -> AugmentedBatch:
    batch = np.array(batch, dtype=np.float64, order="C")  # own copy; frozen below
    if batch.ndim != 2:
        raise DimMismatch(f"batch must be 2-D, got ndim={batch.ndim}")
    d = cond.require_ss_given_r()
    if batch.shape[1] != d.shape[0]:
        raise DimMismatch(f"batch dim {batch.shape[1]} != diagonal dim {d.shape[0]}")
    rows, cols = batch.shape
    epsilon = rng.draw_epsilon(spec.mode, spec.seed, rows, cols)
    if spec.beta == 0.0:
        # Degenerate no-op; copying keeps the output bit-identical to the
        # input (adding eps*0 would turn -0.0 entries into +0.0).
        augmented = batch.copy()
    else:
        scale = np.ascontiguousarray(spec.beta * d)
        augmented = _kernels.apply_shift(batch, epsilon, scale)
    for arr in (batch, augmented, epsilon):
        arr.flags.writeable = False
    return AugmentedBatch(original=batch, augmented=augmented, epsilon=epsilon, spec=spec)


def augment_words(word_batch: np.ndarray, sentence_delta: np.ndarray) -> np.ndarray:
    """Broadcast each sentence's shift onto all of its word embeddings."""
    word_batch = np.asarray(word_batch, dtype=np.float64)
    sentence_delta = np.asarray(sentence_delta, dtype=np.float64)
    if word_batch.ndim != 3 or sentence_delta.ndim != 2:
        raise DimMismatch(
            f"need word tensor (B,T,D) and delta matrix (B,D), got "
            f"{word_batch.shape} and {sentence_delta.shape}"
        )
    if word_batch.shape[0] != sentence_delta.shape[0] or word_batch.shape[2] != sentence_delta.shape[1]:
        raise DimMismatch(
            f"word tensor {word_batch.shape} incompatible with delta {sentence_delta.shape}"
        )
    return word_batch + sentence_delta[:, np.newaxis, :]


def interpolate(e: np.ndarray, e_prime: np.ndarray, steps: int) -> list[np.ndarray]:
    """steps points on the segment from e to e_prime, endpoints exact."""
    e = np.asarray(e, dtype=np.float64)
    e_prime = np.asarray(e_prime, dtype=np.float64)
    if e.shape != e_prime.shape or e.ndim != 1:
        raise DimMismatch(f"need two vectors of equal dim, got {e.shape} vs {e_prime.shape}")
    if steps < 2:
        raise StepsTooSmall(f"steps must be >= 2, got {steps}")
    points = [e.copy()]
    for k in range(1, steps - 1):
        t = k / (steps - 1)
        points.append((1.0 - t) * e + t * e_prime)
    points.append(e_prime.copy())
    return points
