"""Covariance blocks and conditional (Schur-complement) variances.

estimate_covariances produces the four cross/self blocks from a paired corpus
(unbiased N-1 estimator on centered data). conditional_covariance turns them
into the residual covariance of one modality given the other:

    C_ss|r = C_ss - C_sr (C_rr + lambda*I)^-1 C_rs
    C_rr|s = C_rr - C_rs (C_ss + lambda*I)^-1 C_sr

The diagonal of C_ss|r scales text perturbations; the diagonal of C_rr|s is
the per-dimension image-shift target used by the regularization loss.

Ridge lambda defaults to 1e-6 * trace(block)/dim of the conditioning block;
pseudo-inverses are never used so the Schur structure is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
from pathlib import Path

import numpy as np

from .errors import (
    IoError,
    ManifestSchemaError,
    MissingFile,
    NotComputed,
    ShapeMismatch,
    SingularConditioningBlock,
    TooFewSamples,
)
from .store import PairedCorpus, read_f64_matrix, write_f64_matrix

SS_GIVEN_R = "ss_given_r"
RR_GIVEN_S = "rr_given_s"

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-8
DIAG_CLAMP_TOL = 1e-8
CONDITION_LIMIT = 1e12
AUTO_RIDGE_FACTOR = 1e-6


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def _check_symmetric_psd(mat: np.ndarray, name: str) -> None:
    asym = np.abs(mat - mat.T).max() if mat.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ShapeMismatch(f"{name} is not symmetric (max asymmetry {asym:.3e})")
    eigs = np.linalg.eigvalsh(mat)
    floor = -PSD_TOL * max(1.0, float(eigs[-1]))
    if eigs[0] < floor:
        raise ShapeMismatch(f"{name} is not PSD (min eigenvalue {eigs[0]:.3e})")


@dataclass
class CovarianceSet:
    """Four covariance blocks plus the sample means they were centered on.

    ridge_lambda None means "auto": resolved per conditioning block as
    1e-6 * trace(block)/dim when a conditional is requested.
    """

    c_ss: np.ndarray
    c_rr: np.ndarray
    c_sr: np.ndarray
    c_rs: np.ndarray
    mean_s: np.ndarray
    mean_r: np.ndarray
    sample_count: int
    ridge_lambda: float | None = None

    def __post_init__(self) -> None:
        self.c_ss = _freeze(self.c_ss)
        self.c_rr = _freeze(self.c_rr)
        self.c_sr = _freeze(self.c_sr)
        self.c_rs = _freeze(self.c_rs)
        self.mean_s = _freeze(self.mean_s)
        self.mean_r = _freeze(self.mean_r)
        if self.ridge_lambda is not None and self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be nonnegative")
        d_s, d_r = self.c_ss.shape[0], self.c_rr.shape[0]
        if self.c_sr.shape != (d_s, d_r) or self.c_rs.shape != (d_r, d_s):
            raise ShapeMismatch("cross-covariance block shapes are inconsistent")
        if not np.array_equal(self.c_rs, self.c_sr.T):
            raise ShapeMismatch("c_rs must equal transpose(c_sr) exactly")
        _check_symmetric_psd(self.c_ss, "c_ss")
        _check_symmetric_psd(self.c_rr, "c_rr")

    @property
    def text_dim(self) -> int:
        return self.c_ss.shape[0]

    @property
    def image_dim(self) -> int:
        return self.c_rr.shape[0]


@dataclass
class ConditionalDiagonals:
    """Conditional variance diagonals (always) and full matrices (optional).

    Either side may be absent when only one conditional was computed; the
    require_* accessors raise NotComputed in that case.
    """

    d_ss_given_r: np.ndarray | None = None
    d_rr_given_s: np.ndarray | None = None
    full_ss_given_r: np.ndarray | None = None
    full_rr_given_s: np.ndarray | None = None

    def __post_init__(self) -> None:
        for name in ("d_ss_given_r", "d_rr_given_s", "full_ss_given_r", "full_rr_given_s"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, _freeze(value))

    def require_ss_given_r(self) -> np.ndarray:
        if self.d_ss_given_r is None:
            raise NotComputed("d(C_ss|r) was not computed")
        return self.d_ss_given_r

    def require_rr_given_s(self) -> np.ndarray:
        if self.d_rr_given_s is None:
            raise NotComputed("d(C_rr|s) was not computed")
        return self.d_rr_given_s


def estimate_covariances_from_arrays(
    s: np.ndarray, r: np.ndarray, ridge_lambda: float | None = None
) -> CovarianceSet:
    s = np.asarray(s, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if s.ndim != 2 or r.ndim != 2 or s.shape[0] != r.shape[0]:
        raise ShapeMismatch("need two 2-D arrays with matching row counts")
    n = s.shape[0]
    if n < 2:
        raise TooFewSamples(f"covariance needs at least 2 samples, got {n}")
    mean_s = s.mean(axis=0)
    mean_r = r.mean(axis=0)
    sc = s - mean_s
    rc = r - mean_r
    denom = n - 1
    c_ss = sc.T @ sc / denom
    c_rr = rc.T @ rc / denom
    c_ss = (c_ss + c_ss.T) / 2.0
    c_rr = (c_rr + c_rr.T) / 2.0
    c_sr = sc.T @ rc / denom
    return CovarianceSet(
        c_ss=c_ss,
        c_rr=c_rr,
        c_sr=c_sr,
        c_rs=c_sr.T.copy(),
        mean_s=mean_s,
        mean_r=mean_r,
        sample_count=n,
        ridge_lambda=ridge_lambda,
    )


def estimate_covariances(corpus: PairedCorpus, ridge_lambda: float | None = None) -> CovarianceSet:
    return estimate_covariances_from_arrays(
        corpus.text.as_f64(), corpus.image.as_f64(), ridge_lambda
    )


def resolve_ridge(cov: CovarianceSet, block: np.ndarray) -> float:
    if cov.ridge_lambda is not None:
        return float(cov.ridge_lambda)
    dim = block.shape[0]
    return AUTO_RIDGE_FACTOR * float(np.trace(block)) / dim


def _schur_complement(
    own: np.ndarray, cross: np.ndarray, conditioning: np.ndarray, lam: float, name: str
) -> tuple[np.ndarray, np.ndarray]:
    regularized = conditioning + lam * np.eye(conditioning.shape[0])
    eigs = np.linalg.eigvalsh(regularized)
    if eigs[0] <= 0.0 or eigs[-1] / eigs[0] > CONDITION_LIMIT:
        raise SingularConditioningBlock(
            f"{name}: conditioning block is numerically singular "
            f"(eigen range [{eigs[0]:.3e}, {eigs[-1]:.3e}], lambda={lam:.3e})"
        )
    solved = np.linalg.solve(regularized, cross.T)
    full = own - cross @ solved
    full = (full + full.T) / 2.0
    diag = np.diag(full).copy()
    low = diag.min()
    if low < -DIAG_CLAMP_TOL:
        raise SingularConditioningBlock(
            f"{name}: conditional diagonal dipped to {low:.3e}, below the clamp tolerance"
        )
    np.clip(diag, 0.0, None, out=diag)
    return diag, full


def conditional_covariance(
    cov: CovarianceSet, target: str, *, store_full: bool = True
) -> ConditionalDiagonals:
    """One conditional covariance; d(·) clamped to >= 0 within the -1e-8 tolerance."""
    if target == SS_GIVEN_R:
        lam = resolve_ridge(cov, cov.c_rr)
        diag, full = _schur_complement(cov.c_ss, cov.c_sr, cov.c_rr, lam, "C_ss|r")
        return ConditionalDiagonals(
            d_ss_given_r=diag, full_ss_given_r=full if store_full else None
        )
    if target == RR_GIVEN_S:
        lam = resolve_ridge(cov, cov.c_ss)
        diag, full = _schur_complement(cov.c_rr, cov.c_rs, cov.c_ss, lam, "C_rr|s")
        return ConditionalDiagonals(
            d_rr_given_s=diag, full_rr_given_s=full if store_full else None
        )
    raise ValueError(f"unknown conditional target {target!r}")


def conditional_both(cov: CovarianceSet, *, store_full: bool = True) -> ConditionalDiagonals:
    ss = conditional_covariance(cov, SS_GIVEN_R, store_full=store_full)
    rr = conditional_covariance(cov, RR_GIVEN_S, store_full=store_full)
    return ConditionalDiagonals(
        d_ss_given_r=ss.d_ss_given_r,
        d_rr_given_s=rr.d_rr_given_s,
        full_ss_given_r=ss.full_ss_given_r,
        full_rr_given_s=rr.full_rr_given_s,
    )


def loewner_leq(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """a ⪯ b up to tol: min eigenvalue of (b - a) >= -tol."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"need two square matrices of equal shape, got {a.shape} vs {b.shape}")
    for name, mat in (("a", a), ("b", b)):
        if np.abs(mat - mat.T).max() > SYMMETRY_TOL:
            raise ShapeMismatch(f"{name} is not symmetric")
    diff = (b - a + (b - a).T) / 2.0
    return bool(np.linalg.eigvalsh(diff)[0] >= -tol)


# --- artifact serialization ---------------------------------------------------

_COV_ROLES = ("cov_ss", "cov_rr", "cov_sr", "cond_diag_ss_r", "cond_diag_rr_s", "mean_s", "mean_r")


def save_covariance_artifact(
    cov: CovarianceSet, cond: ConditionalDiagonals, out_dir: str | Path
) -> Path:
    """Manifest + raw f64le matrices, one file per role tag."""
    out_dir = Path(out_dir)
    arrays = {
        "cov_ss": cov.c_ss,
        "cov_rr": cov.c_rr,
        "cov_sr": cov.c_sr,
        "cond_diag_ss_r": cond.require_ss_given_r(),
        "cond_diag_rr_s": cond.require_rr_given_s(),
        "mean_s": cov.mean_s,
        "mean_r": cov.mean_r,
    }
    manifest = {
        "format_version": 1,
        "dtype": "f64le",
        "text_dim": cov.text_dim,
        "image_dim": cov.image_dim,
        "sample_count": cov.sample_count,
        "ridge_lambda": cov.ridge_lambda,
        "files": {role: f"{role}.bin" for role in _COV_ROLES},
        "shapes": {role: list(arr.shape) for role, arr in arrays.items()},
    }
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for role, arr in arrays.items():
            write_f64_matrix(out_dir / f"{role}.bin", arr)
        path = out_dir / "covariance.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"failed to write covariance artifact into {out_dir}: {exc}") from exc
    return path


def load_covariance_artifact(art_dir: str | Path) -> tuple[CovarianceSet, ConditionalDiagonals]:
    art_dir = Path(art_dir)
    manifest_path = art_dir / "covariance.json"
    if not manifest_path.is_file():
        raise MissingFile(f"covariance manifest not found: {manifest_path}")
    raw = json.loads(manifest_path.read_text())
    if raw.get("format_version") != 1 or raw.get("dtype") != "f64le":
        raise ManifestSchemaError(f"{manifest_path}: unsupported covariance artifact header")
    arrays = {}
    for role in _COV_ROLES:
        shape = tuple(raw["shapes"][role])
        arrays[role] = read_f64_matrix(art_dir / raw["files"][role], shape)
    cov = CovarianceSet(
        c_ss=arrays["cov_ss"],
        c_rr=arrays["cov_rr"],
        c_sr=arrays["cov_sr"],
        c_rs=arrays["cov_sr"].T.copy(),
        mean_s=arrays["mean_s"],
        mean_r=arrays["mean_r"],
        sample_count=int(raw["sample_count"]),
        ridge_lambda=raw["ridge_lambda"],
    )
    cond = ConditionalDiagonals(
        d_ss_given_r=arrays["cond_diag_ss_r"], d_rr_given_s=arrays["cond_diag_rr_s"]
    )
    return cov, cond
