from __future__ import annotations

import numpy as np
import pytest

from sada.augment import AugmentationSpec, MODE_RADEMACHER, MODE_UNIFORM, augment
from sada.covariance import ConditionalDiagonals
from sada.errors import BadConfig, RankDeficientEncoder, TooFewPairs, TooFewSeeds
from sada.testbed import (
    LinearWorld,
    PROP1_AVERAGED,
    PROP1_SAMPLED,
    TestbedSettings,
    WorldConfig,
    collapse_metrics,
    generate_world,
    run_all,
    run_prop1,
    run_prop3,
    run_prop4,
    run_prop5,
    sample_pairs,
    train_prop4_generators,
    world_conditionals,
)
from sada.tinynet import LinearGenerator


@pytest.fixture(scope="module")
def default_world():
    world, corpus = generate_world(WorldConfig(seed=123))
    _, _, cond = world_conditionals(world, corpus)
    return world, corpus, cond


# --- world generation ---------------------------------------------------------------


def test_world_config_validation():
    with pytest.raises(BadConfig):
        WorldConfig(latent_dim=0).validate()
    with pytest.raises(BadConfig):
        WorldConfig(n_samples=1).validate()
    with pytest.raises(BadConfig):
        WorldConfig(semantic_dim=9).validate()
    with pytest.raises(BadConfig):
        WorldConfig(encoder="identity", semantic_dim=4).validate()


def test_tied_maps_no_noise_equal_rows():
    cfg = WorldConfig(latent_dim=3, text_dim=5, image_dim=5, semantic_dim=5, noise=0.0, seed=4)
    world, _ = generate_world(cfg)
    tied = LinearWorld(config=cfg, m_s=world.m_s, m_r=world.m_s, a_star=world.a_star, e_i=world.e_i)
    e_s, e_r = sample_pairs(tied, 50, seed=9)
    assert np.array_equal(e_s, e_r)


def test_world_latent_coupling(default_world):
    world, corpus, _ = default_world
    from sada.covariance import estimate_covariances

    cov = estimate_covariances(corpus)
    assert np.linalg.norm(cov.c_sr, "fro") > 0


def test_world_determinism():
    a_world, a_corpus = generate_world(WorldConfig(seed=55))
    b_world, b_corpus = generate_world(WorldConfig(seed=55))
    assert np.array_equal(a_world.m_s, b_world.m_s)
    assert a_corpus.text.data.tobytes() == b_corpus.text.data.tobytes()


def test_corpus_satisfies_invariants(default_world):
    _, corpus, _ = default_world
    assert corpus.count == 1000
    assert corpus.text.dim == 8 and corpus.image.dim == 8


# --- proposition 1 --------------------------------------------------------------------


def test_prop1_too_few_seeds(default_world):
    world, corpus, _ = default_world
    spec = AugmentationSpec(beta=0.05, seed=1)
    with pytest.raises(TooFewSeeds):
        run_prop1(world, corpus, spec, 5)


def test_prop1_beta_zero_control_exact(default_world):
    world, corpus, _ = default_world
    spec = AugmentationSpec(beta=0.0, seed=1)
    res = run_prop1(world, corpus, spec, 20, mode=PROP1_AVERAGED)
    assert abs(res.trace_aug - res.trace_unaug) <= 1e-10 * max(1.0, res.trace_unaug)
    res_s = run_prop1(world, corpus, spec, 20, mode=PROP1_SAMPLED, aug_copies=2)
    assert abs(res_s.trace_aug - res_s.trace_unaug) <= 1e-10 * max(1.0, res_s.trace_unaug)


def test_prop1_direction(default_world):
    world, corpus, _ = default_world
    spec = AugmentationSpec(beta=0.05, seed=1)
    res = run_prop1(world, corpus, spec, 100, mode=PROP1_AVERAGED)
    assert res.trace_aug < res.trace_unaug
    assert res.passed


def test_prop1_deterministic(default_world):
    world, corpus, _ = default_world
    spec = AugmentationSpec(beta=0.05, seed=1)
    a = run_prop1(world, corpus, spec, 25)
    b = run_prop1(world, corpus, spec, 25)
    assert a.trace_aug == b.trace_aug and a.trace_unaug == b.trace_unaug


# --- proposition 3 --------------------------------------------------------------------


def test_prop3_effect(default_world):
    world, corpus, _ = default_world
    res = run_prop3(world, corpus, seed=5)
    assert res.rel_change >= 0.01
    assert res.passed


def test_prop3_identity_encoder():
    world, corpus = generate_world(WorldConfig(seed=31, encoder="identity"))
    res = run_prop3(world, corpus, seed=5)
    assert res.passed


def test_prop3_rectangular_encoder():
    world, corpus = generate_world(WorldConfig(seed=33, semantic_dim=6))
    res = run_prop3(world, corpus, seed=5)
    assert res.rel_change > 0


def test_prop3_rank_deficient_encoder():
    cfg = WorldConfig(seed=35)
    world, corpus = generate_world(cfg)
    e_i = world.e_i.copy()
    e_i[-1] = e_i[0]  # duplicate a row: rank deficient by construction
    broken = LinearWorld(config=cfg, m_s=world.m_s, m_r=world.m_r, a_star=world.a_star, e_i=e_i)
    with pytest.raises(RankDeficientEncoder):
        run_prop3(broken, corpus, seed=5)


# --- proposition 4 --------------------------------------------------------------------


def test_prop4_experiment(default_world):
    world, corpus, cond = default_world
    gen_with, gen_base = train_prop4_generators(world, corpus, cond, seed=6)
    spec = AugmentationSpec(beta=0.05, mode=MODE_UNIFORM, seed=11)
    res = run_prop4(world, gen_with, gen_base, cond, spec, corpus.text.as_f64())
    assert res.p95_with < res.p95_without
    assert res.max_bound_violation <= res.bound_tol
    assert res.passed
    assert res.k_lipschitz == res.max_with


def test_prop4_exact_construction_no_tolerance():
    """Identity encoder, d_ss = 1, beta = 1, generator A = diag(Lambda):
    the ±1-pattern image shift hits Lambda exactly in every dimension."""
    cfg = WorldConfig(seed=41, encoder="identity")
    world, corpus = generate_world(cfg)
    d_ss = np.ones(8)
    lam = np.abs(np.random.default_rng(7).normal(size=8)) + 0.1
    cond = ConditionalDiagonals(d_ss_given_r=d_ss, d_rr_given_s=lam)
    gen = LinearGenerator(np.diag(lam))
    spec = AugmentationSpec(beta=1.0, mode=MODE_RADEMACHER, seed=3)
    # evaluation points on a quarter grid: adding ±1 and subtracting back is
    # exact, so the text shift is exactly ±1 per dimension
    batch = np.round(corpus.text.as_f64() * 4.0) / 4.0
    pairs = augment(batch, ConditionalDiagonals(d_ss_given_r=d_ss), spec)
    de = pairs.augmented - pairs.original
    assert np.all(np.abs(de) == 1.0)
    # the linear generator maps the shift directly: |A de| == Lambda bit-for-bit
    df = world.encode(gen(de))
    assert np.array_equal(np.abs(df), np.broadcast_to(lam, df.shape))


def test_prop4_degenerate_pairs(default_world):
    world, corpus, cond = default_world
    gen = LinearGenerator(np.eye(8))
    zero_cond = ConditionalDiagonals(
        d_ss_given_r=np.zeros(8), d_rr_given_s=cond.require_rr_given_s()
    )
    spec = AugmentationSpec(beta=0.05, seed=1)
    from sada.errors import DegenerateShift

    with pytest.raises(DegenerateShift):
        run_prop4(world, gen, gen, zero_cond, spec, corpus.text.as_f64())


# --- proposition 5 --------------------------------------------------------------------


def test_prop5_canonical():
    res = run_prop5()
    assert res.witness_l_db <= 1e-6
    assert res.witness_l_r >= 1.9
    assert res.control_l_r == 0.0
    assert res.passed


def test_prop5_scales_with_varphi():
    res = run_prop5(varphi=0.01)
    assert res.threshold == pytest.approx(0.01 * 0.99 * 2.0)
    assert res.passed


# --- collapse detectors ----------------------------------------------------------------


def test_collapse_detectors(default_world):
    world, corpus, cond = default_world
    spec = AugmentationSpec(beta=0.05, seed=2)
    batch = corpus.text.as_f64()
    gen_with, _ = train_prop4_generators(world, corpus, cond, seed=6)

    constant = collapse_metrics(lambda rows: np.zeros((rows.shape[0], 8)), batch, cond, spec, 200)
    assert constant.verdict == "collapse_similar"

    explosive = collapse_metrics(
        lambda rows: world.encode(gen_with(rows)) * 1e6, batch, cond, spec, 200
    )
    assert explosive.verdict == "collapse_different"

    healthy = collapse_metrics(lambda rows: world.encode(gen_with(rows)), batch, cond, spec, 200)
    assert healthy.verdict == "healthy"


def test_collapse_too_few_pairs(default_world):
    world, corpus, cond = default_world
    spec = AugmentationSpec(beta=0.05, seed=2)
    with pytest.raises(TooFewPairs):
        collapse_metrics(lambda rows: rows, corpus.text.as_f64(), cond, spec, 99)
    with pytest.raises(TooFewPairs):
        collapse_metrics(lambda rows: rows, corpus.text.as_f64()[:50], cond, spec, 100)


# --- full report ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def full_report():
    return run_all(TestbedSettings(master_seed=0))


def test_run_all_passes(full_report):
    assert full_report.all_passed()


def test_report_passes_recomputable(full_report):
    rep = full_report
    d = rep.to_dict()
    assert d["prop1"]["passed"] == (d["prop1"]["trace_aug"] <= d["prop1"]["trace_unaug"])
    assert d["prop3"]["passed"] == (d["prop3"]["rel_change"] >= 0.01)
    assert d["prop4"]["passed"] == (
        d["prop4"]["p95_with"] < d["prop4"]["p95_without"]
        and d["prop4"]["max_bound_violation"] <= d["prop4"]["bound_tol"]
    )
    thresh = d["prop5"]["threshold"]
    assert d["prop5"]["passed"] == (
        d["prop5"]["witness_l_db"] <= 1e-6 and d["prop5"]["witness_l_r"] >= thresh
    )
    assert d["collapse"]["constant"]["verdict"] == "collapse_similar"
    assert d["collapse"]["explosive"]["verdict"] == "collapse_different"
    assert d["collapse"]["trained"]["verdict"] == "healthy"


def test_run_all_byte_deterministic(full_report):
    again = run_all(TestbedSettings(master_seed=0))
    assert again.to_json() == full_report.to_json()


def test_run_all_master_seed_changes_world(full_report):
    other = run_all(TestbedSettings(master_seed=1, n_seeds=20))
    assert other.to_json() != full_report.to_json()
    assert other.all_passed()
