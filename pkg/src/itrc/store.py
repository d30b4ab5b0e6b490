"""Embedding store format, dataset splitting, and synthetic data generation.

A store is a directory holding ``manifest.json`` plus two raw row-major
little-endian float32 blobs (``text.f32le``, ``image.f32le``), one row per
pair in manifest order. Blobs carry no header; the manifest declares the
format name, version, counts, per-pair labels, and blob checksums.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .rng import SeededRng

STORE_FORMAT = "iteb"
STORE_VERSION = 1
EMBED_DIM = 512
LABELS = ("Similar", "Complementary")
TEXT_BLOB = "text.f32le"
IMAGE_BLOB = "image.f32le"


class StoreError(Exception):
    """Base class for store validation failures."""


class StoreFormatError(StoreError):
    """Bad magic, version, or manifest structure."""


class StoreDimensionError(StoreError):
    """Blob rows do not have the declared width."""


class StoreCountError(StoreError):
    """Blob row count or manifest pair count disagrees with the header."""


class StoreChecksumError(StoreError):
    """Blob bytes do not match the manifest checksum."""


class StoreValueError(StoreError):
    """Non-finite values inside a blob."""


class StoreLabelError(StoreError):
    """A pair carries a label outside the two supported classes."""


@dataclass
class PairRecord:
    pair_id: str
    label: str
    text: Optional[str] = None
    image_path: Optional[str] = None


@dataclass
class EmbeddingStore:
    """N pairs of text/image embeddings with labels.

    Matrices are float64 in memory but quantized to their float32 disk
    image on construction, so save/load round-trips bitwise.
    """

    records: list[PairRecord]
    text_matrix: np.ndarray
    image_matrix: np.ndarray

    def __post_init__(self):
        self.text_matrix = np.asarray(self.text_matrix, dtype=np.float32).astype(np.float64)
        self.image_matrix = np.asarray(self.image_matrix, dtype=np.float32).astype(np.float64)
        n = len(self.records)
        for tag, m in (("text", self.text_matrix), ("image", self.image_matrix)):
            if m.ndim != 2 or m.shape[0] != n:
                raise StoreCountError(f"{tag} matrix has {m.shape} for {n} records")
            if not np.isfinite(m).all():
                raise StoreValueError(f"{tag} matrix contains non-finite entries")
        if self.text_matrix.shape[1] != self.image_matrix.shape[1]:
            raise StoreDimensionError(
                f"text dim {self.text_matrix.shape[1]} != image dim {self.image_matrix.shape[1]}")
        seen = set()
        for rec in self.records:
            if rec.pair_id in seen:
                raise StoreFormatError(f"duplicate pair_id {rec.pair_id!r}")
            seen.add(rec.pair_id)
            if rec.label not in LABELS:
                raise StoreLabelError(
                    f"pair {rec.pair_id!r} has unsupported label {rec.label!r}; "
                    f"only {LABELS[0]}/{LABELS[1]} are handled")

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def dim(self) -> int:
        return self.text_matrix.shape[1]

    @property
    def pair_ids(self) -> list[str]:
        return [r.pair_id for r in self.records]

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.records]

    def label_indices(self) -> np.ndarray:
        """Labels as class indices, Similar=0, Complementary=1."""
        return np.array([LABELS.index(r.label) for r in self.records], dtype=np.int64)


def _blob_bytes(matrix: np.ndarray) -> bytes:
    return np.ascontiguousarray(matrix, dtype="<f4").tobytes()


def save_store(store: EmbeddingStore, path) -> None:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    text_bytes = _blob_bytes(store.text_matrix)
    image_bytes = _blob_bytes(store.image_matrix)
    manifest = {
        "format": STORE_FORMAT,
        "version": STORE_VERSION,
        "n": store.n,
        "dim": store.dim,
        "pairs": [{"id": r.pair_id, "label": r.label} for r in store.records],
        "checksums": {
            TEXT_BLOB: hashlib.sha256(text_bytes).hexdigest(),
            IMAGE_BLOB: hashlib.sha256(image_bytes).hexdigest(),
        },
    }
    (out / TEXT_BLOB).write_bytes(text_bytes)
    (out / IMAGE_BLOB).write_bytes(image_bytes)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))


def _read_blob(path: Path, name: str, n: int, dim: int, checksum: str) -> np.ndarray:
    raw = (path / name).read_bytes()
    expected = n * dim * 4
    if len(raw) != expected:
        if n > 0 and len(raw) % (4 * n) == 0:
            raise StoreDimensionError(
                f"{name}: rows carry {len(raw) // (4 * n)} floats but manifest declares dim={dim}")
        if len(raw) % (4 * dim) == 0:
            raise StoreCountError(
                f"{name}: blob holds {len(raw) // (4 * dim)} rows but manifest declares n={n}")
        raise StoreCountError(
            f"{name}: blob is {len(raw)} bytes, expected {expected} for n={n}, dim={dim}")
    if hashlib.sha256(raw).hexdigest() != checksum:
        raise StoreChecksumError(f"{name}: sha256 does not match manifest")
    data = np.frombuffer(raw, dtype="<f4").reshape(n, dim)
    if not np.isfinite(data).all():
        bad = int(np.argwhere(~np.isfinite(data))[0][0])
        raise StoreValueError(f"{name}: non-finite value in row {bad}")
    return data.astype(np.float64)


def load_store(path) -> EmbeddingStore:
    """Load and fully validate a store directory.

    Raises a distinct :class:`StoreError` subclass per failure mode so
    callers can tell corruption from format drift.
    """
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise StoreFormatError(f"{root}: no manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise StoreFormatError(f"{root}: manifest is not valid JSON: {exc}") from exc
    if manifest.get("format") != STORE_FORMAT:
        raise StoreFormatError(f"{root}: format {manifest.get('format')!r} != {STORE_FORMAT!r}")
    if manifest.get("version") != STORE_VERSION:
        raise StoreFormatError(f"{root}: version {manifest.get('version')!r} != {STORE_VERSION}")
    for key in ("n", "dim", "pairs", "checksums"):
        if key not in manifest:
            raise StoreFormatError(f"{root}: manifest missing {key!r}")
    n, dim = int(manifest["n"]), int(manifest["dim"])
    pairs = manifest["pairs"]
    if len(pairs) != n:
        raise StoreCountError(f"{root}: manifest lists {len(pairs)} pairs but declares n={n}")
    text = _read_blob(root, TEXT_BLOB, n, dim, manifest["checksums"].get(TEXT_BLOB, ""))
    image = _read_blob(root, IMAGE_BLOB, n, dim, manifest["checksums"].get(IMAGE_BLOB, ""))
    records = [PairRecord(pair_id=str(p["id"]), label=str(p["label"])) for p in pairs]
    return EmbeddingStore(records=records, text_matrix=text, image_matrix=image)


@dataclass
class SplitAssignment:
    """Per-pair train/val/test tags from a seeded shuffle."""

    tags: list[str]
    seed: int
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def indices(self, tag: str) -> np.ndarray:
        return np.array([i for i, t in enumerate(self.tags) if t == tag], dtype=np.int64)

    @property
    def train_indices(self) -> np.ndarray:
        return self.indices("train")

    @property
    def val_indices(self) -> np.ndarray:
        return self.indices("val")

    @property
    def test_indices(self) -> np.ndarray:
        return self.indices("test")


def split(n: int, ratios: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0) -> SplitAssignment:
    """Seeded shuffle, then contiguous train/val/test partition."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split: ratios {ratios} must be three values summing to 1")
    perm = SeededRng(seed).permutation(n)
    # floor of the exact product; the float product can land a hair under it
    n_train = math.floor(ratios[0] * n + 1e-9)
    n_val = math.floor(ratios[1] * n + 1e-9)
    tags = [""] * n
    for i in perm[:n_train]:
        tags[i] = "train"
    for i in perm[n_train:n_train + n_val]:
        tags[i] = "val"
    for i in perm[n_train + n_val:]:
        tags[i] = "test"
    return SplitAssignment(tags=tags, seed=seed, ratios=ratios)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def synth_generate(n: int, separation: float, seed: int, dim: int = EMBED_DIM,
                   noise: float = 0.35) -> EmbeddingStore:
    """Two-class synthetic store with class means exactly ``separation`` apart.

    Per modality, a unit-norm center is shifted +/- separation/2 along an
    orthogonal direction to produce the two class means; samples add
    Gaussian noise with total std ~``noise``. ``separation=0`` collapses
    both classes onto one distribution (chance-level control).
    """
    if n < 4:
        raise ValueError(f"synth_generate: n must be >= 4, got {n}")
    if separation < 0:
        raise ValueError(f"synth_generate: separation must be >= 0, got {separation}")
    rng = SeededRng(seed)
    labels = [LABELS[i % 2] for i in range(n)]
    label_idx = np.array([i % 2 for i in range(n)])
    matrices = {}
    for modality in ("text", "image"):
        drng = rng.child(f"{modality}-directions")
        center = _unit(drng.normal(size=dim))
        axis = drng.normal(size=dim)
        axis = _unit(axis - (axis @ center) * center)
        means = np.stack([center - 0.5 * separation * axis,
                          center + 0.5 * separation * axis])
        z = rng.child(f"{modality}-noise").normal(size=(n, dim))
        matrices[modality] = means[label_idx] + (noise / math.sqrt(dim)) * z
    records = [PairRecord(pair_id=f"synth-{i:05d}", label=labels[i]) for i in range(n)]
    return EmbeddingStore(records=records, text_matrix=matrices["text"],
                          image_matrix=matrices["image"])
