from __future__ import annotations

import numpy as np
import pytest

from conftest import random_joint_spd
from sada.covariance import (
    CovarianceSet,
    ConditionalDiagonals,
    RR_GIVEN_S,
    SS_GIVEN_R,
    conditional_both,
    conditional_covariance,
    estimate_covariances,
    estimate_covariances_from_arrays,
    load_covariance_artifact,
    loewner_leq,
    save_covariance_artifact,
)
from sada.errors import NotComputed, ShapeMismatch, SingularConditioningBlock, TooFewSamples
from sada.store import make_corpus


def _set_from_blocks(c_ss, c_rr, c_sr, lam=None) -> CovarianceSet:
    return CovarianceSet(
        c_ss=c_ss,
        c_rr=c_rr,
        c_sr=c_sr,
        c_rs=np.ascontiguousarray(c_sr).T.copy(),
        mean_s=np.zeros(c_ss.shape[0]),
        mean_r=np.zeros(c_rr.shape[0]),
        sample_count=1000,
        ridge_lambda=lam,
    )


# --- estimation ---------------------------------------------------------------


def test_two_sample_hand_value():
    # s = {(0), (2)}, r = {(0), (2)}: mean 1, centered {-1, 1}, N-1 divisor -> 2
    corpus = make_corpus(np.array([[0.0], [2.0]]), np.array([[0.0], [2.0]]))
    cov = estimate_covariances(corpus)
    assert cov.c_ss[0, 0] == pytest.approx(2.0)
    assert cov.c_rr[0, 0] == pytest.approx(2.0)
    assert cov.c_sr[0, 0] == pytest.approx(2.0)
    assert np.allclose(cov.mean_s, [1.0])


def test_constant_column_zero_variance():
    gen = np.random.default_rng(0)
    text = gen.normal(size=(50, 3))
    text[:, 1] = 7.5
    cov = estimate_covariances(make_corpus(text, gen.normal(size=(50, 2))))
    assert np.allclose(cov.c_ss[1, :], 0.0, atol=1e-12)
    assert np.allclose(cov.c_ss[:, 1], 0.0, atol=1e-12)


def test_independent_blocks_cross_covariance_small():
    # Monte-Carlo oracle: for independent draws the cross block shrinks at
    # roughly stderr = sigma^2/sqrt(N); allow 5 stderr.
    n = 100_000
    gen = np.random.default_rng(42)
    cov = estimate_covariances_from_arrays(gen.normal(size=(n, 3)), gen.normal(size=(n, 3)))
    stderr = 1.0 / np.sqrt(n)
    assert np.abs(cov.c_sr).max() <= 5 * stderr


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        estimate_covariances_from_arrays(np.ones((1, 2)), np.ones((1, 2)))


def test_estimation_deterministic(small_corpus):
    a = estimate_covariances(small_corpus)
    b = estimate_covariances(small_corpus)
    assert a.c_ss.tobytes() == b.c_ss.tobytes()
    assert a.c_sr.tobytes() == b.c_sr.tobytes()


def test_blocks_symmetric_and_cross_transposed(small_corpus):
    cov = estimate_covariances(small_corpus)
    assert np.abs(cov.c_ss - cov.c_ss.T).max() <= 1e-10
    assert np.abs(cov.c_rr - cov.c_rr.T).max() <= 1e-10
    assert np.array_equal(cov.c_rs, cov.c_sr.T)


# --- conditionals ---------------------------------------------------------------


def test_scalar_schur_value():
    cov = _set_from_blocks(np.array([[2.0]]), np.array([[1.0]]), np.array([[1.0]]), lam=0.0)
    cond = conditional_covariance(cov, SS_GIVEN_R)
    # 2 - 1 * 1 * 1 = 1; regression-residual oracle gives the same value
    assert cond.require_ss_given_r()[0] == pytest.approx(1.0, rel=1e-12)


def test_zero_cross_block_is_identity():
    gen = np.random.default_rng(3)
    c_ss, c_rr, _, _ = random_joint_spd(gen, 4, 4)
    cov = _set_from_blocks(c_ss, c_rr, np.zeros((4, 4)), lam=0.0)
    cond = conditional_covariance(cov, SS_GIVEN_R)
    assert np.allclose(cond.full_ss_given_r, c_ss, atol=1e-12)


def test_conditional_diag_bounded_by_marginal():
    gen = np.random.default_rng(7)
    for _ in range(100):
        c_ss, c_rr, c_sr, _ = random_joint_spd(gen, 8, 8)
        cov = _set_from_blocks(c_ss, c_rr, c_sr, lam=0.0)
        d = conditional_covariance(cov, SS_GIVEN_R).require_ss_given_r()
        assert np.all(d <= np.diag(c_ss) + 1e-8)
        assert np.all(d >= 0.0)


def test_regression_residual_oracle():
    """diag(C_ss|r) == per-dim variance of LS residuals, rel 1e-6, N >= 10*D."""
    gen = np.random.default_rng(11)
    d_s, d_r, n = 6, 5, 400
    z = gen.normal(size=(n, 4))
    s = z @ gen.normal(size=(4, d_s)) + 0.3 * gen.normal(size=(n, d_s))
    r = z @ gen.normal(size=(4, d_r)) + 0.3 * gen.normal(size=(n, d_r))
    cov = estimate_covariances_from_arrays(s, r, ridge_lambda=0.0)
    d = conditional_covariance(cov, SS_GIVEN_R).require_ss_given_r()
    sc = s - s.mean(axis=0)
    rc = r - r.mean(axis=0)
    w, *_ = np.linalg.lstsq(rc, sc, rcond=None)
    resid = sc - rc @ w
    oracle = (resid**2).sum(axis=0) / (n - 1)
    assert np.allclose(d, oracle, rtol=1e-6)


def test_rr_given_s_side():
    gen = np.random.default_rng(5)
    c_ss, c_rr, c_sr, _ = random_joint_spd(gen, 3, 4)
    cov = _set_from_blocks(c_ss, c_rr, c_sr, lam=0.0)
    cond = conditional_covariance(cov, RR_GIVEN_S)
    expected = c_rr - c_sr.T @ np.linalg.solve(c_ss, c_sr)
    assert np.allclose(cond.full_rr_given_s, (expected + expected.T) / 2, atol=1e-10)
    with pytest.raises(NotComputed):
        cond.require_ss_given_r()


def test_ridge_monotonicity():
    gen = np.random.default_rng(13)
    c_ss, c_rr, c_sr, _ = random_joint_spd(gen, 6, 6)
    norms = []
    for lam in [0.0, 1e-4, 1e-2, 1.0, 10.0]:
        solved = np.linalg.solve(c_rr + lam * np.eye(6), c_sr.T)
        norms.append(np.linalg.norm(c_sr @ solved, "fro"))
    assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))


def test_singular_conditioning_block():
    c_rr = np.diag([1.0, 1e-30])
    cov = _set_from_blocks(np.eye(2), c_rr, 0.1 * np.eye(2), lam=0.0)
    with pytest.raises(SingularConditioningBlock):
        conditional_covariance(cov, SS_GIVEN_R)


def test_auto_ridge_close_to_zero_ridge_when_well_conditioned():
    gen = np.random.default_rng(17)
    c_ss, c_rr, c_sr, _ = random_joint_spd(gen, 5, 5)
    auto = conditional_covariance(
        _set_from_blocks(c_ss, c_rr, c_sr), SS_GIVEN_R
    ).require_ss_given_r()
    exact = conditional_covariance(
        _set_from_blocks(c_ss, c_rr, c_sr, lam=0.0), SS_GIVEN_R
    ).require_ss_given_r()
    assert np.allclose(auto, exact, rtol=1e-4)


# --- loewner ------------------------------------------------------------------


def test_loewner_trivial_cases():
    assert loewner_leq(np.zeros((3, 3)), np.eye(3), 1e-12) is True
    assert loewner_leq(np.eye(3), np.zeros((3, 3)), 1e-12) is False
    with pytest.raises(ShapeMismatch):
        loewner_leq(np.zeros((2, 2)), np.zeros((3, 3)), 1e-12)
    with pytest.raises(ShapeMismatch):
        loewner_leq(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2), 1e-12)


def test_schur_loewner_property_random_spd():
    gen = np.random.default_rng(19)
    for _ in range(100):
        c_ss, c_rr, c_sr, _ = random_joint_spd(gen, 8, 8)
        cov = _set_from_blocks(c_ss, c_rr, c_sr, lam=0.0)
        full = conditional_covariance(cov, SS_GIVEN_R).full_ss_given_r
        assert loewner_leq(full, c_ss, 1e-8)


# --- artifact round trip ----------------------------------------------------------


def test_artifact_roundtrip(tmp_path, small_corpus):
    cov = estimate_covariances(small_corpus, ridge_lambda=1e-9)
    cond = conditional_both(cov, store_full=False)
    save_covariance_artifact(cov, cond, tmp_path)
    cov2, cond2 = load_covariance_artifact(tmp_path)
    assert cov2.c_ss.tobytes() == cov.c_ss.tobytes()
    assert cov2.c_sr.tobytes() == cov.c_sr.tobytes()
    assert cov2.mean_r.tobytes() == cov.mean_r.tobytes()
    assert cov2.ridge_lambda == cov.ridge_lambda
    assert cond2.require_ss_given_r().tobytes() == cond.require_ss_given_r().tobytes()
    assert cond2.require_rr_given_s().tobytes() == cond.require_rr_given_s().tobytes()


def test_conditional_diagonals_requires():
    cond = ConditionalDiagonals(d_ss_given_r=np.ones(3))
    assert cond.require_ss_given_r().shape == (3,)
    with pytest.raises(NotComputed):
        cond.require_rr_given_s()
