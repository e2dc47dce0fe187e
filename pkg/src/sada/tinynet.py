"""Trainable augmenter: a small recurrent-like network e' = e + f(e).

Each of the n steps owns a one-hidden-layer tanh MLP that maps the input
embedding e to a per-dimension gate w_i(e) and offset b_i(e); the recursion is

    h_0 = e,    h_i = e + (h_{i-1} ⊙ w_i(e) + b_i(e)),    e' = h_n.

All parameters zero makes the net the exact identity. Training minimizes

    r * L_id(e', e) + (1 - r) * S(e, G(e'))

with L_id = -min(MSE(e', e), cap) pushing e' away from e and the semantic
term holding it back; the generator G is frozen (its parameters never change,
though gradients flow through its Jacobian). Plain full-batch gradient
descent with manual backprop keeps runs bit-reproducible under a seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .errors import DimMismatch, IoError, MissingFile
from .losses import cosine_loss_batch, cosine_loss_grad_b_batch
from .store import PairedCorpus, read_f64_matrix, write_f64_matrix

_PARAM_ORDER = ("w1", "b1", "ww", "bw", "wb", "bb")


@dataclass
class StepParams:
    """One step's MLP: hidden = tanh(e @ w1 + b1); w = hidden @ ww + bw; b likewise."""

    w1: np.ndarray
    b1: np.ndarray
    ww: np.ndarray
    bw: np.ndarray
    wb: np.ndarray
    bb: np.ndarray

    @classmethod
    def zeros(cls, dim: int, hidden: int) -> "StepParams":
        return cls(
            w1=np.zeros((dim, hidden)),
            b1=np.zeros(hidden),
            ww=np.zeros((hidden, dim)),
            bw=np.zeros(dim),
            wb=np.zeros((hidden, dim)),
            bb=np.zeros(dim),
        )

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in _PARAM_ORDER]


class TinyNet:
    """n-step augmenter; default n=2, hidden width 4*dim."""

    def __init__(self, dim: int, hidden: int | None = None, steps: int = 2):
        if steps < 1:
            raise ValueError(f"steps must be >= 1, got {steps}")
        self.dim = dim
        self.hidden = hidden if hidden is not None else 4 * dim
        self.steps = [StepParams.zeros(dim, self.hidden) for _ in range(steps)]

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def randomize_features(self, seed: int, scale: float = 1.0, head_scale: float = 0.0) -> None:
        """Random hidden layers, zero heads: still the identity map, but with
        nonzero head gradients (all-zero nets sit at a dead stationary point).

        head_scale > 0 also seeds the output heads, displacing the init off
        the identity; the distance term needs a nonzero shift to act on.
        """
        gen = rng.gaussian_generator(seed)
        for step in self.steps:
            step.w1 = gen.normal(scale=scale / np.sqrt(self.dim), size=step.w1.shape)
            step.b1 = gen.normal(scale=0.1 * scale, size=step.b1.shape)
            if head_scale > 0.0:
                step.ww = gen.normal(scale=head_scale / np.sqrt(self.hidden), size=step.ww.shape)
                step.bw = gen.normal(scale=head_scale, size=step.bw.shape)
                step.wb = gen.normal(scale=head_scale / np.sqrt(self.hidden), size=step.wb.shape)
                step.bb = gen.normal(scale=head_scale, size=step.bb.shape)

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for s in self.steps for a in s.arrays()])

    def set_parameter_vector(self, vec: np.ndarray) -> None:
        offset = 0
        for step in self.steps:
            for name in _PARAM_ORDER:
                arr = getattr(step, name)
                size = arr.size
                setattr(step, name, vec[offset : offset + size].reshape(arr.shape).copy())
                offset += size
        if offset != vec.size:
            raise DimMismatch(f"parameter vector has {vec.size} entries, net needs {offset}")


@dataclass
class StepGrads:
    w1: np.ndarray
    b1: np.ndarray
    ww: np.ndarray
    bw: np.ndarray
    wb: np.ndarray
    bb: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in _PARAM_ORDER]


def grads_vector(grads: list[StepGrads]) -> np.ndarray:
    return np.concatenate([a.ravel() for g in grads for a in g.arrays()])


def _forward_cached(net: TinyNet, batch: np.ndarray):
    h = batch
    cache = []
    for step in net.steps:
        hidden = np.tanh(batch @ step.w1 + step.b1)
        w = hidden @ step.ww + step.bw
        b = hidden @ step.wb + step.bb
        cache.append((hidden, w, h))
        h = batch + (h * w + b)
    return h, cache


def forward(net: TinyNet, batch: np.ndarray) -> np.ndarray:
    """Row-wise application of the step recursion."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.dim:
        raise DimMismatch(f"batch shape {batch.shape} incompatible with net dim {net.dim}")
    out, _ = _forward_cached(net, batch)
    return out


def _backward(net: TinyNet, batch: np.ndarray, cache, g_out: np.ndarray) -> list[StepGrads]:
    g = g_out
    grads: list[StepGrads] = [None] * net.n_steps  # type: ignore[list-item]
    for i in range(net.n_steps - 1, -1, -1):
        step = net.steps[i]
        hidden, w, h_prev = cache[i]
        dw = g * h_prev
        db = g
        dhidden = dw @ step.ww.T + db @ step.wb.T
        dpre = dhidden * (1.0 - hidden * hidden)
        grads[i] = StepGrads(
            w1=batch.T @ dpre,
            b1=dpre.sum(axis=0),
            ww=hidden.T @ dw,
            bw=dw.sum(axis=0),
            wb=hidden.T @ db,
            bb=db.sum(axis=0),
        )
        g = g * w
    return grads


# --- frozen generators --------------------------------------------------------


class IdentityGenerator:
    """G(e) = e; the degenerate frozen generator."""

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return batch

    def vjp(self, batch: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        return cotangent

    def parameter_bytes(self) -> bytes:
        return b""


class LinearGenerator:
    """Frozen linear map G(e) = A e (rows of the batch are embeddings)."""

    def __init__(self, a: np.ndarray):
        a = np.ascontiguousarray(a, dtype=np.float64)
        a.flags.writeable = False
        self.a = a

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return batch @ self.a.T

    def vjp(self, batch: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        return cotangent @ self.a

    def parameter_bytes(self) -> bytes:
        return self.a.tobytes()


@dataclass(frozen=True)
class ItaTTrainConfig:
    r: float
    learning_rate: float
    epochs: int
    warmup_epochs: int = 0
    distance_cap: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.r < 1.0:
            raise ValueError(f"r must lie in [0, 1), got {self.r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be >= 0")
        if self.distance_cap <= 0:
            raise ValueError("distance_cap must be > 0")


def default_distance_cap(collapse_scale: float) -> float:
    """Spec default: 100 * mean(beta*d(C_ss|r))^2."""
    return 100.0 * collapse_scale**2


@dataclass
class ItaTTrainTrace:
    l_ita_t: list[float] = field(default_factory=list)
    l_id: list[float] = field(default_factory=list)
    s_term: list[float] = field(default_factory=list)
    mean_abs_shift: list[float] = field(default_factory=list)
    collapse_flag: bool = False

    def to_csv(self, path: Path) -> None:
        lines = ["epoch,l_ita_t,l_id,s_term,mean_abs_shift"]
        for i in range(len(self.l_ita_t)):
            lines.append(
                f"{i},{self.l_ita_t[i]!r},{self.l_id[i]!r},"
                f"{self.s_term[i]!r},{self.mean_abs_shift[i]!r}"
            )
        lines.append(f"# collapse_flag,{self.collapse_flag}")
        path.write_text("\n".join(lines) + "\n")


def _loss_parts(net: TinyNet, batch: np.ndarray, frozen_gen, cfg: ItaTTrainConfig, id_weight: float):
    e_prime, cache = _forward_cached(net, batch)
    rows = batch.shape[0]
    diff = e_prime - batch
    mse = float(np.mean(diff * diff))
    l_id = -min(mse, cfg.distance_cap)
    if mse < cfg.distance_cap:
        g_id = -2.0 * diff / diff.size
    else:
        g_id = np.zeros_like(diff)

    gen_out = frozen_gen(e_prime)
    if gen_out.shape != batch.shape:
        raise DimMismatch(
            f"generator output shape {gen_out.shape} must match batch {batch.shape}"
        )
    s_term = float(cosine_loss_batch(batch, gen_out).mean())
    g_gen = cosine_loss_grad_b_batch(batch, gen_out)
    g_s = frozen_gen.vjp(e_prime, g_gen / rows)

    loss = id_weight * l_id + (1.0 - cfg.r) * s_term
    g_out = id_weight * g_id + (1.0 - cfg.r) * g_s
    grads = _backward(net, batch, cache, g_out)
    mean_shift = float(np.mean(np.abs(diff)))
    return loss, grads, l_id, s_term, mean_shift


def loss_ita_t(
    net: TinyNet, batch: np.ndarray, frozen_gen, cfg: ItaTTrainConfig
) -> tuple[float, list[StepGrads]]:
    """Training loss r*L_id + (1-r)*S(e, G(e')) and its parameter gradients."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.dim:
        raise DimMismatch(f"batch shape {batch.shape} incompatible with net dim {net.dim}")
    loss, grads, _, _, _ = _loss_parts(net, batch, frozen_gen, cfg, id_weight=cfg.r)
    return loss, grads


def _apply_grads(net: TinyNet, grads: list[StepGrads], lr: float) -> None:
    for step, grad in zip(net.steps, grads):
        for name in _PARAM_ORDER:
            getattr(step, name)[...] -= lr * getattr(grad, name)


def train(
    net: TinyNet,
    corpus: PairedCorpus,
    frozen_gen,
    cfg: ItaTTrainConfig,
    *,
    collapse_scale: float,
    batch_size: int | None = None,
) -> ItaTTrainTrace:
    """Gradient descent on the net parameters only; full-batch by default,
    deterministic contiguous mini-batches when batch_size is given.

    collapse_scale is the closed-form reference mean(beta*d(C_ss|r)); the
    collapse flag trips when the mean absolute shift exceeds 10x that scale.
    A non-finite loss aborts training and returns the trace with the flag set.
    """
    batch = corpus.text.as_f64()
    if batch.shape[1] != net.dim:
        raise DimMismatch(f"corpus text dim {batch.shape[1]} != net dim {net.dim}")
    if collapse_scale <= 0:
        raise ValueError("collapse_scale must be > 0")
    if batch_size is not None and batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    trace = ItaTTrainTrace()
    gen_before = frozen_gen.parameter_bytes()
    for epoch in range(cfg.epochs):
        id_weight = 0.0 if epoch < cfg.warmup_epochs else cfg.r
        loss, grads, l_id, s_term, mean_shift = _loss_parts(
            net, batch, frozen_gen, cfg, id_weight
        )
        trace.l_ita_t.append(loss)
        trace.l_id.append(l_id)
        trace.s_term.append(s_term)
        trace.mean_abs_shift.append(mean_shift)
        if not np.isfinite(loss):
            trace.collapse_flag = True
            return trace
        if batch_size is None:
            _apply_grads(net, grads, cfg.learning_rate)
        else:
            for start in range(0, batch.shape[0], batch_size):
                chunk = batch[start : start + batch_size]
                _, chunk_grads, _, _, _ = _loss_parts(net, chunk, frozen_gen, cfg, id_weight)
                _apply_grads(net, chunk_grads, cfg.learning_rate)
    assert frozen_gen.parameter_bytes() == gen_before
    if trace.mean_abs_shift and trace.mean_abs_shift[-1] > 10.0 * collapse_scale:
        trace.collapse_flag = True
    return trace


# --- parameter persistence ------------------------------------------------------


def save_net(net: TinyNet, out_dir: str | Path) -> Path:
    """Raw f64 parameter blob + JSON descriptor."""
    out_dir = Path(out_dir)
    descriptor = {
        "dim": net.dim,
        "hidden": net.hidden,
        "steps": net.n_steps,
        "order": list(_PARAM_ORDER),
        "parameters_file": "net_params.bin",
    }
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_f64_matrix(out_dir / "net_params.bin", net.parameter_vector())
        (out_dir / "net.json").write_text(json.dumps(descriptor, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"failed to write net into {out_dir}: {exc}") from exc
    return out_dir / "net.json"


def load_net(net_dir: str | Path) -> TinyNet:
    net_dir = Path(net_dir)
    desc_path = net_dir / "net.json"
    if not desc_path.is_file():
        raise MissingFile(f"net descriptor not found: {desc_path}")
    desc = json.loads(desc_path.read_text())
    net = TinyNet(dim=desc["dim"], hidden=desc["hidden"], steps=desc["steps"])
    n_params = net.parameter_vector().size
    vec = read_f64_matrix(net_dir / desc["parameters_file"], (n_params,))
    net.set_parameter_vector(vec)
    return net
