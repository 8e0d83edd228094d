"""Embedding datasets: binary container format, synthetic generator, splits.

The on-disk container ("EGAE") is little-endian and fully pinned:

    magic  4 bytes  b"EGAE"
    u32    version  (currently 1)
    u32    d
    u32    N
    f32    N*d row-major embedding matrix
    u32    N labels
    u32    provenance byte length, then that many UTF-8 bytes

Rows are expected to be unit vectors. On load, rows further than 1e-6
from unit norm are renormalized (so a save/load round trip of clean data
is bit-identical); rows further than 1e-3 trigger a warning; rows with
norm at or below NORM_EPS are rejected.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataFormatError, DegenerateNormError
from .tensor import NORM_EPS

log = logging.getLogger(__name__)

MAGIC = b"EGAE"
FORMAT_VERSION = 1

RENORM_TOL = 1e-6
WARN_TOL = 1e-3


@dataclass
class EmbeddingSet:
    """An (N, d) float32 matrix of unit rows with integer labels."""

    vectors: np.ndarray
    labels: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint32)
        if self.vectors.ndim != 2:
            raise DataFormatError(f"vectors must be 2-d, got shape {self.vectors.shape}")
        if self.labels.shape != (self.vectors.shape[0],):
            raise DataFormatError(
                f"labels shape {self.labels.shape} does not match {self.vectors.shape[0]} rows"
            )

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def d(self):
        return self.vectors.shape[1]

    @property
    def n_classes(self):
        return int(np.unique(self.labels).size)

    def subset(self, indices):
        idx = np.asarray(indices)
        return EmbeddingSet(self.vectors[idx], self.labels[idx], self.provenance)


def _normalize_rows(vectors, what):
    norms = np.sqrt((vectors.astype(np.float64) ** 2).sum(axis=1))
    if np.any(norms <= NORM_EPS):
        bad = int(np.argmin(norms))
        raise DegenerateNormError(f"{what}: row {bad} has norm {norms[bad]:g}, cannot normalize")
    dev = np.abs(norms - 1.0)
    n_warn = int((dev > WARN_TOL).sum())
    if n_warn:
        log.warning("%s: %d rows deviate from unit norm by more than %g; renormalizing", what, n_warn, WARN_TOL)
    off = dev > RENORM_TOL
    if np.any(off):
        vectors = vectors.copy()
        vectors[off] = vectors[off] / norms[off, None].astype(np.float32)
    return vectors


def save_embeddings(es: EmbeddingSet, path):
    """Write an EmbeddingSet in the binary container format."""
    prov = es.provenance.encode("utf-8")
    n, d = es.vectors.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, d, n))
        f.write(np.ascontiguousarray(es.vectors, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(es.labels, dtype="<u4").tobytes())
        f.write(struct.pack("<I", len(prov)))
        f.write(prov)


def load_embeddings(path) -> EmbeddingSet:
    """Read the binary container format, validating structure and norms."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 16:
        raise DataFormatError(f"{path}: file too short to hold a header")
    if raw[:4] != MAGIC:
        raise DataFormatError(f"{path}: bad magic {raw[:4]!r}")
    version, d, n = struct.unpack_from("<III", raw, 4)
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    if d == 0:
        raise DataFormatError(f"{path}: zero embedding dimension")
    off = 16
    vec_bytes = 4 * n * d
    lab_bytes = 4 * n
    if len(raw) < off + vec_bytes + lab_bytes + 4:
        raise DataFormatError(f"{path}: truncated (have {len(raw)} bytes, header promises more)")
    vectors = np.frombuffer(raw, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    off += vec_bytes
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=off)
    off += lab_bytes
    (prov_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    if len(raw) != off + prov_len:
        raise DataFormatError(
            f"{path}: size mismatch (expected {off + prov_len} bytes, file has {len(raw)})"
        )
    provenance = raw[off : off + prov_len].decode("utf-8")
    if not np.all(np.isfinite(vectors)):
        raise DataFormatError(f"{path}: non-finite embedding values")
    vectors = _normalize_rows(np.array(vectors), str(path))
    return EmbeddingSet(vectors, np.array(labels), provenance)


def load_embeddings_csv(path, provenance="") -> EmbeddingSet:
    """Import `label,v0,v1,...` rows; rows are always renormalized."""
    try:
        table = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise DataFormatError(f"{path}: {e}") from e
    if table.shape[1] < 3:
        raise DataFormatError(f"{path}: need a label column plus at least 2 coordinates")
    labels = table[:, 0]
    if np.any(labels < 0) or np.any(labels != np.round(labels)):
        raise DataFormatError(f"{path}: labels must be non-negative integers")
    vectors = _normalize_rows(table[:, 1:].astype(np.float32), str(path))
    return EmbeddingSet(vectors, labels.astype(np.uint32), provenance or str(path))


def gen_synthetic(d, n_classes, n_per_class, sigma, seed) -> EmbeddingSet:
    """Labeled unit vectors clustered around random directions.

    Class means are drawn uniformly on the sphere; each sample is
    l2_normalize(mean + sigma * gaussian). Deterministic under seed.
    """
    if d < 2:
        raise ConfigError(f"synthetic data needs d >= 2, got {d}")
    if n_classes < 1 or n_per_class < 1:
        raise ConfigError("n_classes and n_per_class must be positive")
    if sigma < 0:
        raise ConfigError(f"sigma must be non-negative, got {sigma}")
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(n_classes, d))
    means /= np.sqrt((means**2).sum(axis=1, keepdims=True))
    rows = []
    for c in range(n_classes):
        noise = rng.normal(size=(n_per_class, d))
        raw = means[c] + sigma * noise
        rows.append(raw / np.sqrt((raw**2).sum(axis=1, keepdims=True)))
    vectors = np.concatenate(rows, axis=0).astype(np.float32)
    labels = np.repeat(np.arange(n_classes, dtype=np.uint32), n_per_class)
    prov = f"synthetic/d{d}/c{n_classes}/n{n_per_class}/sigma{sigma:g}/seed{seed}"
    return EmbeddingSet(vectors, labels, prov)


@dataclass
class SplitSpec:
    """How to carve a dataset into train / database / query roles.

    mode "id": per-class stratified split; the database doubles as the
    training set and the held-out remainder becomes the queries.
    mode "ood": classes are first partitioned into seen/unseen; training
    uses every seen-class sample, while unseen-class samples are split
    into database and queries, so retrieval is evaluated on classes the
    adapter never saw.
    """

    mode: str = "id"
    db_fraction: float = 0.75
    seen_fraction: float = 0.8
    seed: int = 0

    def validate(self):
        if self.mode not in ("id", "ood"):
            raise ConfigError(f"unknown split mode {self.mode!r}")
        if not 0.0 < self.db_fraction < 1.0:
            raise ConfigError(f"db_fraction must lie in (0, 1), got {self.db_fraction}")
        if not 0.0 < self.seen_fraction < 1.0:
            raise ConfigError(f"seen_fraction must lie in (0, 1), got {self.seen_fraction}")


@dataclass
class Split:
    train: np.ndarray
    database: np.ndarray
    queries: np.ndarray
    seen_classes: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.uint32))
    unseen_classes: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.uint32))


def _stratified(labels, classes, fraction, rng):
    """Per-class permutation split; sizes land within one sample of target."""
    first, rest = [], []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise ConfigError(f"class {c} has {idx.size} sample(s); need at least 2 to split")
        perm = idx[rng.permutation(idx.size)]
        k = int(round(fraction * idx.size))
        k = min(max(k, 1), idx.size - 1)
        first.append(perm[:k])
        rest.append(perm[k:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(rest))


def make_split(es: EmbeddingSet, spec: SplitSpec) -> Split:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    classes = np.unique(es.labels)
    if spec.mode == "id":
        db, q = _stratified(es.labels, classes, spec.db_fraction, rng)
        return Split(train=db.copy(), database=db, queries=q, seen_classes=classes)
    # ood: carve the class set first, with the same rng stream
    if classes.size < 2:
        raise ConfigError("class-disjoint split needs at least 2 classes")
    perm = classes[rng.permutation(classes.size)]
    n_seen = int(round(spec.seen_fraction * classes.size))
    n_seen = min(max(n_seen, 1), classes.size - 1)
    seen = np.sort(perm[:n_seen])
    unseen = np.sort(perm[n_seen:])
    train = np.flatnonzero(np.isin(es.labels, seen))
    db, q = _stratified(es.labels, unseen, spec.db_fraction, rng)
    return Split(train=train, database=db, queries=q, seen_classes=seen, unseen_classes=unseen)
