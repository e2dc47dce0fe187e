"""Semantic-consistency measure and the image-semantic conservation losses.

S(text, image) = 1 - cos(text, image), range [0, 2], zero iff positively
collinear. The direction-bounding loss compares the text shift and the image
shift; by default it is the scale-invariant cosine form

    L_db = 1 - <ds, df> / (||ds|| * ||df||)

with the squared-norm denominator variant (not scale invariant) available
behind squared_norms=True. The regularization loss pins the image shift to
its per-dimension target:

    L_r = varphi * || (e_f'' - e_f) - eps* ⊙ beta * d(C_rr|s) ||^2

which is zero only when the shift magnitude equals beta*d(C_rr|s) exactly —
strictly positive whenever the conditional variance is, so the "no shift at
all" collapse is excluded while the direction-only loss permits it
(tightness_witness builds the explicit counterexample).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateShift, DimMismatch, NonPositiveVariance, ZeroVector


def _vec(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimMismatch(f"{name} must be a vector, got shape {x.shape}")
    return x


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine is undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


def cosine_loss(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b), clamped into [0, 2] against rounding excursions."""
    return float(np.clip(1.0 - _cosine(a, b), 0.0, 2.0))


def cosine_loss_grad_b(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d(1 - cos(a,b))/db; matches central finite differences."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine gradient is undefined for a zero vector")
    cos = float(np.dot(a, b) / (na * nb))
    return -(a / (na * nb) - cos * b / (nb * nb))


def cosine_loss_batch(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise 1 - cos(t_i, y_i), clamped into [0, 2]."""
    nt = np.linalg.norm(t, axis=1)
    ny = np.linalg.norm(y, axis=1)
    if (nt == 0).any() or (ny == 0).any():
        raise ZeroVector("cosine is undefined for a zero row")
    cos = np.einsum("ij,ij->i", t, y) / (nt * ny)
    return np.clip(1.0 - cos, 0.0, 2.0)


def cosine_loss_grad_b_batch(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise d(1 - cos(t_i, y_i))/dy_i."""
    nt = np.linalg.norm(t, axis=1)
    ny = np.linalg.norm(y, axis=1)
    if (nt == 0).any() or (ny == 0).any():
        raise ZeroVector("cosine gradient is undefined for a zero row")
    cos = np.einsum("ij,ij->i", t, y) / (nt * ny)
    return -(t / (nt * ny)[:, None] - (cos / (ny * ny))[:, None] * y)


@dataclass(frozen=True)
class SemanticPair:
    text: np.ndarray
    image: np.ndarray

    def __post_init__(self) -> None:
        text = _vec(self.text, "text")
        image = _vec(self.image, "image")
        if text.shape != image.shape:
            raise DimMismatch(
                f"semantic pair dims differ: {text.shape[0]} vs {image.shape[0]}"
            )
        object.__setattr__(self, "text", text)
        object.__setattr__(self, "image", image)


def semantic_consistency(pair: SemanticPair) -> float:
    return cosine_loss(pair.text, pair.image)


def semantic_loss_total(
    e_s: np.ndarray,
    e_s_prime: np.ndarray,
    g_of_s: np.ndarray,
    g_of_s_prime: np.ndarray,
    *,
    omit_first: bool = False,
) -> float:
    """Sum of the four cross terms S(e, g), S(e', g'), S(e, g'), S(e', g).

    omit_first drops S(e_s, g_of_s) for frameworks whose base objective
    already contains it.
    """
    vecs = [
        _vec(e_s, "e_s"),
        _vec(e_s_prime, "e_s_prime"),
        _vec(g_of_s, "g_of_s"),
        _vec(g_of_s_prime, "g_of_s_prime"),
    ]
    dims = {v.shape[0] for v in vecs}
    if len(dims) != 1:
        raise DimMismatch(f"all four embeddings must share one dim, got {sorted(dims)}")
    e, ep, g, gp = vecs
    total = 0.0
    if not omit_first:
        total += cosine_loss(e, g)
    total += cosine_loss(ep, gp)
    total += cosine_loss(e, gp)
    total += cosine_loss(ep, g)
    return total


@dataclass(frozen=True)
class ShiftQuadruple:
    e_s: np.ndarray
    e_s_prime: np.ndarray
    e_f: np.ndarray
    e_f_prime: np.ndarray

    def __post_init__(self) -> None:
        names = ("e_s", "e_s_prime", "e_f", "e_f_prime")
        vecs = [_vec(getattr(self, n), n) for n in names]
        if len({v.shape[0] for v in vecs}) != 1:
            raise DimMismatch("all four endpoints must share one dim")
        for n, v in zip(names, vecs):
            object.__setattr__(self, n, v)

    def text_shift(self) -> np.ndarray:
        return self.e_s_prime - self.e_s

    def image_shift(self) -> np.ndarray:
        return self.e_f_prime - self.e_f


def loss_db(q: ShiftQuadruple, *, squared_norms: bool = False) -> float:
    """Direction bounding between the text shift and the image shift.

    squared_norms=True divides by the product of squared norms instead of the
    product of norms; kept for comparison, not scale invariant.
    """
    ds = q.text_shift()
    df = q.image_shift()
    nds = float(np.linalg.norm(ds))
    ndf = float(np.linalg.norm(df))
    if nds == 0.0 or ndf == 0.0:
        raise DegenerateShift("both shifts must be nonzero for direction bounding")
    if squared_norms:
        return float(1.0 - np.dot(ds, df) / (nds * nds * ndf * ndf))
    return float(np.clip(1.0 - np.dot(ds, df) / (nds * ndf), 0.0, 2.0))


@dataclass(frozen=True)
class LrTarget:
    epsilon_star: np.ndarray
    beta: float
    d_rr_given_s: np.ndarray
    varphi: float

    def __post_init__(self) -> None:
        eps = _vec(self.epsilon_star, "epsilon_star")
        d = _vec(self.d_rr_given_s, "d_rr_given_s")
        if eps.shape != d.shape:
            raise DimMismatch("epsilon_star and d_rr_given_s dims differ")
        if not np.all(np.abs(eps) == 1.0):
            raise ValueError("epsilon_star entries must be exactly ±1")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.varphi <= 0:
            raise ValueError(f"varphi must be > 0, got {self.varphi}")
        if np.any(d < 0):
            raise NonPositiveVariance("d_rr_given_s entries must be >= 0")
        object.__setattr__(self, "epsilon_star", eps)
        object.__setattr__(self, "d_rr_given_s", d)
        if not np.all(np.isfinite(self.target_vector())):
            raise ValueError("target vector is not finite")

    def target_vector(self) -> np.ndarray:
        return self.epsilon_star * (self.beta * self.d_rr_given_s)


def loss_r(q: ShiftQuadruple, target: LrTarget) -> float:
    """varphi * squared norm of the image-shift residual against the target."""
    shift = q.image_shift()
    t = target.target_vector()
    if shift.shape != t.shape:
        raise DimMismatch(f"image shift dim {shift.shape[0]} != target dim {t.shape[0]}")
    residual = shift - t
    return float(target.varphi * np.dot(residual, residual))


def grad_loss_r(q: ShiftQuadruple, target: LrTarget) -> np.ndarray:
    """dL_r/d(e_f_prime) = 2*varphi*((e_f'' - e_f) - target)."""
    shift = q.image_shift()
    t = target.target_vector()
    if shift.shape != t.shape:
        raise DimMismatch(f"image shift dim {shift.shape[0]} != target dim {t.shape[0]}")
    return 2.0 * target.varphi * (shift - t)


def tightness_witness(
    d_rr_given_s: np.ndarray, beta: float, varphi: float = 1.0
) -> tuple[ShiftQuadruple, LrTarget]:
    """A quadruple with L_db ≈ 0 but L_r near its maximum.

    The image shift is 1e-9 times the target: perfectly aligned with the text
    shift (so direction bounding sees nothing wrong) yet essentially no image
    movement, which the regularization loss punishes with
    ~varphi*||beta*d||^2. Scaling the image shift up to the full target drops
    L_r to zero while L_db stays zero.
    """
    d = _vec(d_rr_given_s, "d_rr_given_s")
    if np.any(d <= 0):
        raise NonPositiveVariance("tightness witness needs strictly positive variances")
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    eps_star = np.ones_like(d)
    target = LrTarget(epsilon_star=eps_star, beta=beta, d_rr_given_s=d, varphi=varphi)
    t = target.target_vector()
    q = ShiftQuadruple(
        e_s=np.zeros_like(d),
        e_s_prime=t.copy(),
        e_f=np.zeros_like(d),
        e_f_prime=1e-9 * t,
    )
    return q, target


def inverse_mse(e_prime: np.ndarray, e: np.ndarray, cap: float) -> float:
    """Negated mean squared distance, clipped at cap (the ITA_T distance term)."""
    e_prime = np.asarray(e_prime, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if e_prime.shape != e.shape:
        raise DimMismatch(f"shape mismatch: {e_prime.shape} vs {e.shape}")
    if cap <= 0:
        raise ValueError(f"cap must be > 0, got {cap}")
    mse = float(np.mean((e_prime - e) ** 2))
    return -min(mse, cap)


def midpoint_convexity_gap(fixed: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """S(fixed, (a+b)/2) - (S(fixed,a) + S(fixed,b))/2; <= 0 where S is convex.

    1 - cos is only convex in a cone around the fixed argument (roughly 35°),
    which covers the small-perturbation regime the augmentation operates in;
    far outside that cone the gap can be positive.
    """
    fixed = _vec(fixed, "fixed")
    a = _vec(a, "a")
    b = _vec(b, "b")
    mid = (a + b) / 2.0
    return cosine_loss(fixed, mid) - (cosine_loss(fixed, a) + cosine_loss(fixed, b)) / 2.0
