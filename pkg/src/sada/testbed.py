"""Synthetic linear world that turns the framework's guarantees into experiments.

The world is a linear-Gaussian stand-in for a text-to-image pipeline: a latent
z drives both a text embedding e_s = M_s z + noise and a raw image embedding
e_r = M_r z + noise; a frozen linear encoder E_I (orthonormal rows) maps raw
image space to the shared semantic space; the population best-response map
A* = argmin E||e_r - A e_s||^2 plays the role of the well-trained generator.

Experiments:

* prop 1  — augmenting the text side shrinks the across-seed covariance of the
  fitted linear generator (trace compared with and without augmentation).
* prop 3  — adding the image-semantic regularizer to the semantic-space
  training objective measurably changes the raw-space output distribution.
* prop 4  — the regularized generator has a smaller p95 semantic Lipschitz
  ratio than the unregularized baseline, and its ±1-pattern image shifts
  respect the per-dimension bound Lambda = beta * d(C_rr|s).
* prop 5  — executable tightness witness: direction bounding accepts a
  near-zero image shift that the regularization loss maximally punishes.
* collapse detectors — "extremely similar" (min image shift), "completely
  different" (max shift ratio), with an artifact-defined threshold pair.

Every experiment derives its seeds from one master seed, so a full run is
byte-reproducible.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .augment import AugmentationSpec, MODE_RADEMACHER, MODE_UNIFORM, augment
from .covariance import (
    ConditionalDiagonals,
    CovarianceSet,
    RR_GIVEN_S,
    SS_GIVEN_R,
    conditional_covariance,
    estimate_covariances,
    estimate_covariances_from_arrays,
)
from .errors import (
    BadConfig,
    DegenerateShift,
    DimMismatch,
    RankDeficientEncoder,
    TooFewPairs,
    TooFewSeeds,
)
from .losses import cosine_loss_grad_b_batch, loss_db, loss_r, tightness_witness
from .store import PairedCorpus, make_corpus
from .tinynet import LinearGenerator

UNIFORM_EPS_VARIANCE = 1.0 / 3.0  # E[eps^2] for eps ~ U(-1, 1)

COLLAPSE_SIMILAR_FRAC = 1e-3  # min ||df|| below this fraction of ||Lambda|| => "extremely similar"
COLLAPSE_DIFFERENT_FACTOR = 10.0  # max ratio above 10x the reference => "completely different"


# --- world ---------------------------------------------------------------------


@dataclass(frozen=True)
class WorldConfig:
    latent_dim: int = 4
    text_dim: int = 8
    image_dim: int = 8
    semantic_dim: int = 8
    n_samples: int = 1000
    noise: float = 0.1
    seed: int = 0
    encoder: str = "random"  # "random" (orthonormal rows) or "identity"

    def validate(self) -> None:
        for name in ("latent_dim", "text_dim", "image_dim", "semantic_dim"):
            if getattr(self, name) < 1:
                raise BadConfig(f"{name} must be >= 1")
        if self.n_samples < 2:
            raise BadConfig("n_samples must be >= 2")
        if self.noise < 0:
            raise BadConfig("noise must be >= 0")
        if self.semantic_dim > self.image_dim:
            raise BadConfig("semantic_dim cannot exceed image_dim (E_I needs full row rank)")
        if self.encoder not in ("random", "identity"):
            raise BadConfig(f"encoder must be 'random' or 'identity', got {self.encoder!r}")
        if self.encoder == "identity" and self.semantic_dim != self.image_dim:
            raise BadConfig("identity encoder requires semantic_dim == image_dim")


@dataclass
class LinearWorld:
    config: WorldConfig
    m_s: np.ndarray  # (text_dim, latent_dim)
    m_r: np.ndarray  # (image_dim, latent_dim)
    a_star: np.ndarray  # (image_dim, text_dim), population least-squares map
    e_i: np.ndarray  # (semantic_dim, image_dim), full row rank

    def encode(self, raw: np.ndarray) -> np.ndarray:
        """Raw image rows -> semantic rows."""
        return raw @ self.e_i.T

    def encoder_rank_ok(self) -> bool:
        sv = np.linalg.svd(self.e_i, compute_uv=False)
        return bool(sv.min() > 1e-10 * max(1.0, sv.max()))


def sample_pairs(world: LinearWorld, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """n fresh (e_s, e_r) rows; deterministic under seed."""
    cfg = world.config
    gen = rng.gaussian_generator(seed)
    z = gen.standard_normal((n, cfg.latent_dim))
    xi_s = gen.standard_normal((n, cfg.text_dim))
    xi_r = gen.standard_normal((n, cfg.image_dim))
    e_s = z @ world.m_s.T
    e_r = z @ world.m_r.T
    if cfg.noise > 0:
        e_s = e_s + cfg.noise * xi_s
        e_r = e_r + cfg.noise * xi_r
    return e_s, e_r


def generate_world(config: WorldConfig) -> tuple[LinearWorld, PairedCorpus]:
    config.validate()
    gen = rng.gaussian_generator(config.seed)
    m_s = gen.standard_normal((config.text_dim, config.latent_dim)) / np.sqrt(config.latent_dim)
    m_r = gen.standard_normal((config.image_dim, config.latent_dim)) / np.sqrt(config.latent_dim)
    if config.encoder == "identity":
        e_i = np.eye(config.image_dim)
    else:
        square = gen.standard_normal((config.image_dim, config.image_dim))
        q, _ = np.linalg.qr(square)
        e_i = q[: config.semantic_dim, :]
    # Population least-squares map e_s -> e_r (noise is isotropic).
    c_ss_pop = m_s @ m_s.T + config.noise**2 * np.eye(config.text_dim)
    c_rs_pop = m_r @ m_s.T
    a_star = c_rs_pop @ np.linalg.solve(c_ss_pop, np.eye(config.text_dim))
    world = LinearWorld(config=config, m_s=m_s, m_r=m_r, a_star=a_star, e_i=e_i)
    e_s, e_r = sample_pairs(world, config.n_samples, rng.derive_seed(config.seed, 1))
    corpus = make_corpus(
        e_s,
        e_r,
        encoder_name="linear-world",
        normalized=False,
        source_note=f"synthetic linear world seed={config.seed}",
    )
    return world, corpus


def world_conditionals(
    world: LinearWorld, corpus: PairedCorpus
) -> tuple[CovarianceSet, CovarianceSet, ConditionalDiagonals]:
    """Raw-corpus and semantic-space covariances plus the merged diagonals.

    d(C_ss|r) comes from the raw (text, image) corpus; d(C_rr|s) is estimated
    on (text, E_I(image)) pairs because the regularization loss and Lambda
    live in semantic space.
    """
    cov_raw = estimate_covariances(corpus)
    cond_ss = conditional_covariance(cov_raw, SS_GIVEN_R, store_full=True)
    sem = world.encode(corpus.image.as_f64())
    cov_sem = estimate_covariances_from_arrays(corpus.text.as_f64(), sem)
    cond_rr = conditional_covariance(cov_sem, RR_GIVEN_S, store_full=True)
    merged = ConditionalDiagonals(
        d_ss_given_r=cond_ss.d_ss_given_r,
        d_rr_given_s=cond_rr.d_rr_given_s,
        full_ss_given_r=cond_ss.full_ss_given_r,
        full_rr_given_s=cond_rr.full_rr_given_s,
    )
    return cov_raw, cov_sem, merged


# --- proposition 1 ---------------------------------------------------------------

PROP1_AVERAGED = "averaged"
PROP1_SAMPLED = "sampled"


@dataclass
class Prop1Result:
    trace_unaug: float
    trace_aug: float
    n_seeds: int
    beta: float
    mode: str
    passed: bool


def _ridge_fit(x: np.ndarray, y: np.ndarray, lam: float, extra: np.ndarray | None = None) -> np.ndarray:
    """Least-squares map y ~ A x, normalized per sample so row duplication is a no-op.

    extra is an optional per-dimension addition to the Gram diagonal (the
    closed-form expectation of the augmentation jitter).
    """
    n = x.shape[0]
    gram = x.T @ x / n + lam * np.eye(x.shape[1])
    if extra is not None:
        gram = gram + np.diag(extra)
    rhs = x.T @ y / n
    return np.linalg.solve(gram, rhs).T


def run_prop1(
    world: LinearWorld,
    corpus: PairedCorpus,
    spec: AugmentationSpec,
    n_seeds: int,
    *,
    mode: str = PROP1_AVERAGED,
    aug_copies: int = 8,
    fit_ridge: float = 1e-8,
) -> Prop1Result:
    """Across-seed covariance of the fitted linear generator, with and without
    augmentation.

    Each seed draws a fresh corpus from the world and fits the generator twice.
    "averaged" solves the augmented objective in expectation over epsilon (the
    jitter term enters the Gram as a closed-form diagonal); "sampled" stacks
    aug_copies independently perturbed copies of the rows. The conditional
    diagonal driving the augmentation is estimated once, on the base corpus.
    """
    if n_seeds < 20:
        raise TooFewSeeds(f"need at least 20 seeds, got {n_seeds}")
    if mode not in (PROP1_AVERAGED, PROP1_SAMPLED):
        raise BadConfig(f"unknown prop-1 mode {mode!r}")
    cov = estimate_covariances(corpus)
    d_ss = conditional_covariance(cov, SS_GIVEN_R, store_full=False).require_ss_given_r()
    eps_var = UNIFORM_EPS_VARIANCE if spec.mode == MODE_UNIFORM else 1.0
    n = corpus.count

    raw_fits = []
    aug_fits = []
    for s in range(n_seeds):
        x, y = sample_pairs(world, n, rng.derive_seed(world.config.seed, 7000 + s))
        raw_fits.append(_ridge_fit(x, y, fit_ridge).ravel())
        if mode == PROP1_AVERAGED:
            # Original + averaged augmented rows: the expected augmented Gram
            # gains diag((beta*d)^2 * E[eps^2]) / 2, the cross term is unchanged.
            extra = (spec.beta * d_ss) ** 2 * eps_var / 2.0
            aug_fits.append(_ridge_fit(x, y, fit_ridge, extra=extra).ravel())
        else:
            blocks_x = [x]
            blocks_y = [y]
            for c in range(aug_copies):
                child = AugmentationSpec(
                    beta=spec.beta,
                    mode=spec.mode,
                    seed=rng.derive_seed(spec.seed, s * 100003 + c),
                )
                cond = ConditionalDiagonals(d_ss_given_r=d_ss)
                blocks_x.append(augment(x, cond, child).augmented)
                blocks_y.append(y)
            aug_fits.append(
                _ridge_fit(np.vstack(blocks_x), np.vstack(blocks_y), fit_ridge).ravel()
            )

    trace_unaug = float(np.var(np.array(raw_fits), axis=0, ddof=1).sum())
    trace_aug = float(np.var(np.array(aug_fits), axis=0, ddof=1).sum())
    return Prop1Result(
        trace_unaug=trace_unaug,
        trace_aug=trace_aug,
        n_seeds=n_seeds,
        beta=spec.beta,
        mode=mode,
        passed=trace_aug <= trace_unaug,
    )


# --- shared training machinery ----------------------------------------------------


def _shared_sign_pattern(eps_text: np.ndarray, sem_dim: int, seed: int, start: int) -> np.ndarray:
    """The semantic-space ±1 pattern paired with a text-space pattern.

    Dimensions are shared when text and semantic spaces have equal width (the
    framework's usual setting); extra semantic dims draw fresh signs.
    """
    n, text_dim = eps_text.shape
    if sem_dim <= text_dim:
        return eps_text[:, :sem_dim]
    extra = rng.draw_epsilon(MODE_RADEMACHER, seed, n, sem_dim - text_dim, start=start)
    return np.hstack([eps_text, extra])


def train_linear_generator(
    world: LinearWorld,
    x: np.ndarray,
    t_sem: np.ndarray,
    d_ss: np.ndarray,
    d_rr_sem: np.ndarray,
    *,
    init_a: np.ndarray,
    iters: int,
    lr: float,
    beta: float,
    varphi: float,
    seed: int,
) -> np.ndarray:
    """Gradient descent on mean S(t_i, E_I A x_i) (+ varphi * L_r when varphi > 0).

    The L_r term redraws the ±1 pattern every iteration from the counter
    stream, matching the per-epoch draws of the training recipe.
    """
    e_i = world.e_i
    a = init_a.copy()
    n, text_dim = x.shape
    sem_dim = e_i.shape[0]
    target_scale = beta * d_rr_sem
    shift_scale = beta * d_ss
    for k in range(iters):
        m = e_i @ a
        y = x @ m.T
        g_y = cosine_loss_grad_b_batch(t_sem, y) / n
        d_m = g_y.T @ x
        if varphi > 0.0:
            eps = rng.draw_epsilon(MODE_RADEMACHER, seed, n, text_dim, start=k * n * text_dim)
            eps_sem = _shared_sign_pattern(eps, sem_dim, rng.derive_seed(seed, 17), k * n * sem_dim)
            de = eps * shift_scale
            df = de @ m.T
            resid = df - eps_sem * target_scale
            d_m = d_m + (2.0 * varphi / n) * (resid.T @ de)
        a = a - lr * (e_i.T @ d_m)
    return a


# --- proposition 3 ---------------------------------------------------------------


@dataclass
class Prop3Result:
    var_with: float
    var_without: float
    rel_change: float
    passed: bool


def run_prop3(
    world: LinearWorld,
    corpus: PairedCorpus,
    *,
    iters: int = 400,
    lr: float = 0.5,
    beta: float = 0.05,
    varphi: float = 1000.0,
    n_eval: int = 2000,
    seed: int = 0,
) -> Prop3Result:
    """Raw-space effect of the semantic-space constraint.

    Trains the generator on the semantic objective twice (with and without the
    regularizer) from one shared random init and measures the variance of raw
    outputs around the population map A*. Passes when the relative change is
    at least 1%.
    """
    if not world.encoder_rank_ok():
        raise RankDeficientEncoder("E_I does not have full row rank")
    _, _, cond = world_conditionals(world, corpus)
    d_ss = cond.require_ss_given_r()
    d_rr_sem = cond.require_rr_given_s()
    x = corpus.text.as_f64()
    t_sem = world.encode(corpus.image.as_f64())
    gen = rng.gaussian_generator(rng.derive_seed(seed, 1))
    init_a = gen.standard_normal((world.config.image_dim, world.config.text_dim))
    a_without = train_linear_generator(
        world, x, t_sem, d_ss, d_rr_sem,
        init_a=init_a, iters=iters, lr=lr, beta=beta, varphi=0.0, seed=rng.derive_seed(seed, 2),
    )
    a_with = train_linear_generator(
        world, x, t_sem, d_ss, d_rr_sem,
        init_a=init_a, iters=iters, lr=lr, beta=beta, varphi=varphi, seed=rng.derive_seed(seed, 2),
    )
    x_eval, _ = sample_pairs(world, n_eval, rng.derive_seed(seed, 3))
    f_star = x_eval @ world.a_star.T
    var_without = float(np.mean(np.sum((x_eval @ a_without.T - f_star) ** 2, axis=1)))
    var_with = float(np.mean(np.sum((x_eval @ a_with.T - f_star) ** 2, axis=1)))
    if var_without == 0.0:
        rel_change = np.inf if var_with > 0 else 0.0
    else:
        rel_change = abs(var_with - var_without) / var_without
    return Prop3Result(
        var_with=var_with,
        var_without=var_without,
        rel_change=float(rel_change),
        passed=bool(rel_change >= 0.01),
    )


# --- proposition 4 ---------------------------------------------------------------


@dataclass
class Prop4Result:
    p50_with: float
    p95_with: float
    max_with: float
    p50_without: float
    p95_without: float
    max_without: float
    lambda_bound: list[float]
    k_lipschitz: float
    max_bound_violation: float
    bound_tol: float
    passed: bool


def train_prop4_generators(
    world: LinearWorld,
    corpus: PairedCorpus,
    cond: ConditionalDiagonals,
    *,
    beta: float = 0.05,
    varphi: float = 3e7,
    iters: int = 2000,
    lr: float = 0.005,
    init_scale: float = 2.0,
    seed: int = 0,
) -> tuple[LinearGenerator, LinearGenerator]:
    """(regularized, baseline) generators from one shared random init.

    The semantic objective is scale-blind, so the baseline keeps whatever
    shift scale the init had; init_scale sets that unconstrained scale. The
    regularized result is init-independent (every mode is pinned by the
    shift targets).
    """
    d_ss = cond.require_ss_given_r()
    d_rr_sem = cond.require_rr_given_s()
    x = corpus.text.as_f64()
    t_sem = world.encode(corpus.image.as_f64())
    gen = rng.gaussian_generator(rng.derive_seed(seed, 1))
    init_a = init_scale * gen.standard_normal((world.config.image_dim, world.config.text_dim))
    a_base = train_linear_generator(
        world, x, t_sem, d_ss, d_rr_sem,
        init_a=init_a, iters=iters, lr=lr, beta=beta, varphi=0.0, seed=rng.derive_seed(seed, 2),
    )
    a_reg = train_linear_generator(
        world, x, t_sem, d_ss, d_rr_sem,
        init_a=init_a, iters=iters, lr=lr, beta=beta, varphi=varphi, seed=rng.derive_seed(seed, 2),
    )
    return LinearGenerator(a_reg), LinearGenerator(a_base)


def run_prop4(
    world: LinearWorld,
    gen_with_lr: LinearGenerator,
    gen_baseline: LinearGenerator,
    cond: ConditionalDiagonals,
    spec: AugmentationSpec,
    batch: np.ndarray,
    *,
    tol_frac: float = 0.05,
) -> Prop4Result:
    """Semantic Lipschitz ratios and the per-dimension shift bound.

    Ratios ||E_I G(e') - E_I G(e)|| / ||e' - e|| over uniform-mode pairs for
    both generators; the ±1-pattern shifts of the regularized generator must
    stay within Lambda = beta * d(C_rr|s) plus a 5% training allowance.
    """
    d_ss = cond.require_ss_given_r()
    d_rr_sem = cond.require_rr_given_s()
    if world.config.text_dim != world.e_i.shape[0]:
        raise DimMismatch("the shift bound needs text_dim == semantic_dim (shared ±1 pattern)")
    lam = spec.beta * d_rr_sem

    pairs = augment(batch, ConditionalDiagonals(d_ss_given_r=d_ss), spec)
    de = pairs.augmented - pairs.original
    de_norm = np.linalg.norm(de, axis=1)
    keep = de_norm > 0
    if not keep.any():
        raise DegenerateShift("every augmented pair collapsed onto its original")

    def ratios(gen: LinearGenerator) -> np.ndarray:
        df = world.encode(gen(pairs.augmented) - gen(pairs.original))
        return np.linalg.norm(df, axis=1)[keep] / de_norm[keep]

    r_with = ratios(gen_with_lr)
    r_without = ratios(gen_baseline)

    star_spec = AugmentationSpec(
        beta=spec.beta, mode=MODE_RADEMACHER, seed=rng.derive_seed(spec.seed, 99)
    )
    star = augment(batch, ConditionalDiagonals(d_ss_given_r=d_ss), star_spec)
    df_star = world.encode(gen_with_lr(star.augmented) - gen_with_lr(star.original))
    tol = tol_frac * float(lam.max())
    max_violation = float((np.abs(df_star) - lam[None, :]).max())
    bound_ok = max_violation <= tol

    p50_w, p95_w = np.percentile(r_with, [50, 95])
    p50_o, p95_o = np.percentile(r_without, [50, 95])
    return Prop4Result(
        p50_with=float(p50_w),
        p95_with=float(p95_w),
        max_with=float(r_with.max()),
        p50_without=float(p50_o),
        p95_without=float(p95_o),
        max_without=float(r_without.max()),
        lambda_bound=[float(v) for v in lam],
        k_lipschitz=float(r_with.max()),
        max_bound_violation=max_violation,
        bound_tol=tol,
        passed=bool(p95_w < p95_o and bound_ok),
    )


# --- proposition 5 ---------------------------------------------------------------


@dataclass
class Prop5Result:
    witness_l_db: float
    witness_l_r: float
    threshold: float
    control_l_r: float
    passed: bool


def run_prop5(
    d_rr: tuple[float, ...] = (1.0, 1.0), beta: float = 1.0, varphi: float = 1.0
) -> Prop5Result:
    """Tightness of the regularizer versus direction bounding, on a canonical
    witness. The control branch scales the image shift to the full target,
    collapsing the regularization loss to zero while L_db stays zero."""
    d = np.asarray(d_rr, dtype=np.float64)
    quadruple, target = tightness_witness(d, beta, varphi)
    witness_db = loss_db(quadruple)
    witness_r = loss_r(quadruple, target)
    control = type(quadruple)(
        e_s=quadruple.e_s,
        e_s_prime=quadruple.e_s_prime,
        e_f=quadruple.e_f,
        e_f_prime=target.target_vector().copy(),
    )
    control_r = loss_r(control, target)
    threshold = 0.99 * varphi * float(np.dot(beta * d, beta * d))
    return Prop5Result(
        witness_l_db=float(witness_db),
        witness_l_r=float(witness_r),
        threshold=threshold,
        control_l_r=float(control_r),
        passed=bool(witness_db <= 1e-6 and witness_r >= threshold),
    )


# --- collapse detectors ------------------------------------------------------------


@dataclass
class CollapseResult:
    min_shift_norm: float
    max_ratio: float
    similar_threshold: float
    different_threshold: float
    verdict: str


def collapse_metrics(
    semantic_map,
    batch: np.ndarray,
    cond: ConditionalDiagonals,
    spec: AugmentationSpec,
    n_pairs: int,
) -> CollapseResult:
    """Detect "extremely similar" / "completely different" generation.

    semantic_map takes a batch of text embeddings to semantic image
    embeddings (E_I after the generator). Thresholds are artifact-defined:
    min ||df|| below 1e-3*||Lambda|| flags similarity collapse; max
    ||df||/||de|| above 10 * (||Lambda|| / min nonzero ||de||) flags
    divergence collapse.
    """
    if n_pairs < 100:
        raise TooFewPairs(f"need at least 100 pairs, got {n_pairs}")
    if batch.shape[0] < n_pairs:
        raise TooFewPairs(f"batch has {batch.shape[0]} rows, need {n_pairs}")
    batch = batch[:n_pairs]
    d_ss = cond.require_ss_given_r()
    lam = spec.beta * cond.require_rr_given_s()
    lam_norm = float(np.linalg.norm(lam))
    pairs = augment(batch, ConditionalDiagonals(d_ss_given_r=d_ss), spec)
    de = pairs.augmented - pairs.original
    df = semantic_map(pairs.augmented) - semantic_map(pairs.original)
    de_norm = np.linalg.norm(de, axis=1)
    df_norm = np.linalg.norm(df, axis=1)
    nonzero = de_norm > 0
    if not nonzero.any():
        raise DegenerateShift("all text shifts are zero")
    min_shift = float(df_norm.min())
    max_ratio = float((df_norm[nonzero] / de_norm[nonzero]).max())
    k_ref = lam_norm / float(de_norm[nonzero].min())
    similar_threshold = COLLAPSE_SIMILAR_FRAC * lam_norm
    different_threshold = COLLAPSE_DIFFERENT_FACTOR * k_ref
    similar = min_shift < similar_threshold
    different = max_ratio > different_threshold
    verdict = {
        (False, False): "healthy",
        (True, False): "collapse_similar",
        (False, True): "collapse_different",
        (True, True): "both",
    }[(similar, different)]
    return CollapseResult(
        min_shift_norm=min_shift,
        max_ratio=max_ratio,
        similar_threshold=similar_threshold,
        different_threshold=different_threshold,
        verdict=verdict,
    )


# --- full run -----------------------------------------------------------------------


@dataclass(frozen=True)
class TestbedSettings:
    __test__ = False  # not a pytest class

    master_seed: int = 0
    n_seeds: int = 100
    beta: float = 0.05
    prop1_mode: str = PROP1_AVERAGED
    prop1_copies: int = 8
    prop3_iters: int = 400
    prop3_lr: float = 0.5
    prop3_varphi: float = 1000.0
    prop4_iters: int = 2000
    prop4_lr: float = 0.005
    prop4_varphi: float = 3e7
    collapse_pairs: int = 500
    world: WorldConfig = field(default_factory=WorldConfig)


@dataclass
class TestbedReport:
    settings: dict
    prop1: Prop1Result
    prop1_control: Prop1Result
    prop3: Prop3Result
    prop4: Prop4Result
    prop5: Prop5Result
    collapse_constant: CollapseResult
    collapse_explosive: CollapseResult
    collapse_trained: CollapseResult

    def collapse_detectors_ok(self) -> bool:
        return (
            self.collapse_constant.verdict == "collapse_similar"
            and self.collapse_explosive.verdict == "collapse_different"
            and self.collapse_trained.verdict == "healthy"
        )

    def proposition_passes(self) -> dict[str, bool]:
        return {
            "prop1": self.prop1.passed,
            "prop1_control": self.prop1_control.passed,
            "prop3": self.prop3.passed,
            "prop4": self.prop4.passed,
            "prop5": self.prop5.passed,
            "collapse_detectors": self.collapse_detectors_ok(),
        }

    def all_passed(self) -> bool:
        return all(self.proposition_passes().values())

    def to_dict(self) -> dict:
        out = {
            "settings": self.settings,
            "prop1": asdict(self.prop1),
            "prop1_control": asdict(self.prop1_control),
            "prop3": asdict(self.prop3),
            "prop4": asdict(self.prop4),
            "prop5": asdict(self.prop5),
            "collapse": {
                "constant": asdict(self.collapse_constant),
                "explosive": asdict(self.collapse_explosive),
                "trained": asdict(self.collapse_trained),
            },
            "passes": self.proposition_passes(),
            "all_passed": self.all_passed(),
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def run_all(settings: TestbedSettings) -> TestbedReport:
    """Every proposition experiment under one master seed; byte-reproducible."""
    master = settings.master_seed
    # the world seed always derives from the master seed; everything else in
    # the world config is honored
    world_cfg = dataclasses.replace(settings.world, seed=rng.derive_seed(master, 0))
    world, corpus = generate_world(world_cfg)
    _, _, cond = world_conditionals(world, corpus)

    spec1 = AugmentationSpec(beta=settings.beta, mode=MODE_UNIFORM, seed=rng.derive_seed(master, 1))
    prop1 = run_prop1(
        world, corpus, spec1, settings.n_seeds,
        mode=settings.prop1_mode, aug_copies=settings.prop1_copies,
    )
    spec1_zero = AugmentationSpec(beta=0.0, mode=MODE_UNIFORM, seed=rng.derive_seed(master, 1))
    prop1_control = run_prop1(
        world, corpus, spec1_zero, settings.n_seeds,
        mode=settings.prop1_mode, aug_copies=settings.prop1_copies,
    )

    prop3 = run_prop3(
        world, corpus,
        iters=settings.prop3_iters, lr=settings.prop3_lr, beta=settings.beta,
        varphi=settings.prop3_varphi, seed=rng.derive_seed(master, 2),
    )

    gen_with, gen_base = train_prop4_generators(
        world, corpus, cond,
        beta=settings.beta, varphi=settings.prop4_varphi,
        iters=settings.prop4_iters, lr=settings.prop4_lr,
        seed=rng.derive_seed(master, 3),
    )
    spec4 = AugmentationSpec(beta=settings.beta, mode=MODE_UNIFORM, seed=rng.derive_seed(master, 4))
    batch = corpus.text.as_f64()
    prop4 = run_prop4(world, gen_with, gen_base, cond, spec4, batch)

    prop5 = run_prop5()

    spec_c = AugmentationSpec(beta=settings.beta, mode=MODE_UNIFORM, seed=rng.derive_seed(master, 5))
    sem_dim = world.e_i.shape[0]

    def constant_map(rows: np.ndarray) -> np.ndarray:
        return np.zeros((rows.shape[0], sem_dim))

    def explosive_map(rows: np.ndarray) -> np.ndarray:
        return world.encode(gen_with(rows)) * 1e6

    def trained_map(rows: np.ndarray) -> np.ndarray:
        return world.encode(gen_with(rows))

    n_pairs = min(settings.collapse_pairs, corpus.count)
    collapse_constant = collapse_metrics(constant_map, batch, cond, spec_c, n_pairs)
    collapse_explosive = collapse_metrics(explosive_map, batch, cond, spec_c, n_pairs)
    collapse_trained = collapse_metrics(trained_map, batch, cond, spec_c, n_pairs)

    settings_echo = asdict(settings)
    settings_echo["world"]["seed"] = world_cfg.seed
    return TestbedReport(
        settings=settings_echo,
        prop1=prop1,
        prop1_control=prop1_control,
        prop3=prop3,
        prop4=prop4,
        prop5=prop5,
        collapse_constant=collapse_constant,
        collapse_explosive=collapse_explosive,
        collapse_trained=collapse_trained,
    )


def write_report(report: TestbedReport, path: Path) -> None:
    path.write_text(report.to_json())
