from __future__ import annotations

import numpy as np
import pytest

from sada.store import make_corpus


@pytest.fixture
def small_corpus():
    """5 pairs, text dim 3 / image dim 4, fixed values."""
    gen = np.random.default_rng(1234)
    return make_corpus(
        gen.normal(size=(5, 3)),
        gen.normal(size=(5, 4)),
        encoder_name="fixture",
        source_note="unit test corpus",
    )


def random_joint_spd(gen: np.random.Generator, d_s: int, d_r: int) -> tuple[np.ndarray, ...]:
    """A random joint SPD covariance split into its four blocks."""
    d = d_s + d_r
    m = gen.normal(size=(d, 2 * d))
    joint = m @ m.T / (2 * d) + 1e-3 * np.eye(d)
    return (
        joint[:d_s, :d_s],
        joint[d_s:, d_s:],
        joint[:d_s, d_s:],
        joint[d_s:, :d_s],
    )
