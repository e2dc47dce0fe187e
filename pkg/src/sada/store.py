"""Paired embedding corpora on disk.

A corpus is a JSON manifest plus two header-less raw matrix files: row-major,
little-endian IEEE-754 binary32. The manifest schema is closed (unknown keys
rejected) so any exporter that can write bytes and JSON can produce corpora.

Matrices are stored and held as float32; all downstream math promotes to
float64 through as_f64(). Saving what was loaded reproduces the bytes exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import rng
from .errors import (
    IoError,
    KTooLarge,
    KTooSmall,
    ManifestSchemaError,
    MissingFile,
    NonFiniteValue,
    ShapeMismatch,
)

FORMAT_VERSION = 1
DTYPE_TAG = "f32le"

ROLE_TEXT = "text"
ROLE_IMAGE = "image"

_MANIFEST_FIELDS = {
    "format_version": int,
    "dtype": str,
    "text_dim": int,
    "image_dim": int,
    "pair_count": int,
    "encoder_name": str,
    "normalized": bool,
    "source_note": str,
    "text_file": str,
    "image_file": str,
}


@dataclass
class Manifest:
    format_version: int
    dtype: str
    text_dim: int
    image_dim: int
    pair_count: int
    encoder_name: str
    normalized: bool
    source_note: str
    text_file: str
    image_file: str

    def validate(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise ManifestSchemaError(
                f"unsupported format_version {self.format_version} (expected {FORMAT_VERSION})"
            )
        if self.dtype != DTYPE_TAG:
            raise ManifestSchemaError(f"unsupported dtype {self.dtype!r} (expected {DTYPE_TAG!r})")
        for name in ("text_dim", "image_dim"):
            if getattr(self, name) < 1:
                raise ManifestSchemaError(f"{name} must be >= 1")
        if self.pair_count < 2:
            raise ManifestSchemaError("pair_count must be >= 2")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in _MANIFEST_FIELDS}


def _manifest_from_dict(raw: dict, source: str) -> Manifest:
    unknown = set(raw) - set(_MANIFEST_FIELDS)
    if unknown:
        raise ManifestSchemaError(f"{source}: unknown manifest fields {sorted(unknown)}")
    missing = set(_MANIFEST_FIELDS) - set(raw)
    if missing:
        raise ManifestSchemaError(f"{source}: missing manifest fields {sorted(missing)}")
    for name, typ in _MANIFEST_FIELDS.items():
        value = raw[name]
        if typ is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        else:
            ok = isinstance(value, typ)
        if not ok:
            raise ManifestSchemaError(
                f"{source}: field {name!r} must be {typ.__name__}, got {type(value).__name__}"
            )
    manifest = Manifest(**raw)
    manifest.validate()
    return manifest


class EmbeddingMatrix:
    """N x D float32 matrix with a role tag; immutable after construction."""

    def __init__(self, data: np.ndarray, role: str):
        if role not in (ROLE_TEXT, ROLE_IMAGE):
            raise ValueError(f"role must be 'text' or 'image', got {role!r}")
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 2:
            raise ShapeMismatch(f"{role}: expected a 2-D matrix, got ndim={data.ndim}")
        if data.shape[0] < 2:
            raise ShapeMismatch(f"{role}: need at least 2 rows, got {data.shape[0]}")
        if data.shape[1] < 1:
            raise ShapeMismatch(f"{role}: need at least 1 column")
        bad = ~np.isfinite(data)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise NonFiniteValue(f"{role}: non-finite value at row {row}, col {col}")
        data.flags.writeable = False
        self.data = data
        self.role = role
        self._f64: np.ndarray | None = None

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def as_f64(self) -> np.ndarray:
        """Working-precision view (float64 promotion, cached, read-only)."""
        if self._f64 is None:
            promoted = self.data.astype(np.float64)
            promoted.flags.writeable = False
            self._f64 = promoted
        return self._f64


@dataclass
class PairedCorpus:
    text: EmbeddingMatrix
    image: EmbeddingMatrix
    manifest: Manifest

    def __post_init__(self) -> None:
        if self.text.count != self.image.count:
            raise ShapeMismatch(
                f"pair count mismatch: text has {self.text.count} rows, image {self.image.count}"
            )

    @property
    def count(self) -> int:
        return self.text.count


def make_corpus(
    text: np.ndarray,
    image: np.ndarray,
    *,
    encoder_name: str = "unknown",
    normalized: bool = False,
    source_note: str = "",
) -> PairedCorpus:
    """Corpus from in-memory arrays (quantized to float32, like the disk format)."""
    text_m = EmbeddingMatrix(text, ROLE_TEXT)
    image_m = EmbeddingMatrix(image, ROLE_IMAGE)
    manifest = Manifest(
        format_version=FORMAT_VERSION,
        dtype=DTYPE_TAG,
        text_dim=text_m.dim,
        image_dim=image_m.dim,
        pair_count=text_m.count,
        encoder_name=encoder_name,
        normalized=normalized,
        source_note=source_note,
        text_file="text_embeddings.bin",
        image_file="image_embeddings.bin",
    )
    return PairedCorpus(text=text_m, image=image_m, manifest=manifest)


def _read_raw_matrix(path: Path, count: int, dim: int, role: str) -> np.ndarray:
    expected = 4 * count * dim
    actual = path.stat().st_size
    if actual != expected:
        raise ShapeMismatch(
            f"{path}: declared {count}x{dim} float32 = {expected} bytes, file has {actual}"
        )
    raw = np.fromfile(path, dtype="<f4")
    return raw.reshape(count, dim)


def load_corpus(manifest_path: str | Path) -> PairedCorpus:
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFile(f"manifest not found: {manifest_path}")
    try:
        raw = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestSchemaError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ManifestSchemaError(f"{manifest_path}: manifest must be a JSON object")
    manifest = _manifest_from_dict(raw, str(manifest_path))

    base = manifest_path.parent
    paths = {"text": base / manifest.text_file, "image": base / manifest.image_file}
    for role, path in paths.items():
        if not path.is_file():
            raise MissingFile(f"{role} matrix file not found: {path}")
    text = EmbeddingMatrix(
        _read_raw_matrix(paths["text"], manifest.pair_count, manifest.text_dim, ROLE_TEXT),
        ROLE_TEXT,
    )
    image = EmbeddingMatrix(
        _read_raw_matrix(paths["image"], manifest.pair_count, manifest.image_dim, ROLE_IMAGE),
        ROLE_IMAGE,
    )
    return PairedCorpus(text=text, image=image, manifest=manifest)


def save_corpus(corpus: PairedCorpus, out_dir: str | Path) -> Manifest:
    """Write manifest + raw matrices into out_dir; returns the written manifest."""
    out_dir = Path(out_dir)
    manifest = replace(
        corpus.manifest,
        text_dim=corpus.text.dim,
        image_dim=corpus.image.dim,
        pair_count=corpus.count,
    )
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        corpus.text.data.astype("<f4").tofile(out_dir / manifest.text_file)
        corpus.image.data.astype("<f4").tofile(out_dir / manifest.image_file)
        payload = json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"
        (out_dir / "manifest.json").write_text(payload)
    except OSError as exc:
        raise IoError(f"failed to write corpus into {out_dir}: {exc}") from exc
    return manifest


def subsample(corpus: PairedCorpus, k: int, seed: int) -> PairedCorpus:
    """k pairs without replacement, pairing preserved, deterministic under seed."""
    if k < 2:
        raise KTooSmall(f"k must be >= 2, got {k}")
    if k > corpus.count:
        raise KTooLarge(f"k={k} exceeds corpus size {corpus.count}")
    keys = rng.draw_epsilon(rng.MODE_UNIFORM, seed, corpus.count, 1)[:, 0]
    order = np.argsort(keys, kind="stable")
    picked = np.sort(order[:k])
    text = EmbeddingMatrix(corpus.text.data[picked], ROLE_TEXT)
    image = EmbeddingMatrix(corpus.image.data[picked], ROLE_IMAGE)
    manifest = replace(
        corpus.manifest,
        pair_count=k,
        source_note=f"{corpus.manifest.source_note} [subsample k={k} seed={seed}]".strip(),
    )
    return PairedCorpus(text=text, image=image, manifest=manifest)


# Raw float64 matrices: shared by covariance artifacts and net parameters.


def write_f64_matrix(path: Path, arr: np.ndarray) -> None:
    np.ascontiguousarray(arr, dtype=np.float64).astype("<f8").tofile(path)


def read_f64_matrix(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    expected = 8 * int(np.prod(shape))
    if not path.is_file():
        raise MissingFile(f"matrix file not found: {path}")
    if path.stat().st_size != expected:
        raise ShapeMismatch(f"{path}: expected {expected} bytes for shape {shape}")
    return np.fromfile(path, dtype="<f8").reshape(shape)
