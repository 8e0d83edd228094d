"""Retrieval quality measures and the (K, nprobe) evaluation grid.

Label precision at K divides by K even when a result list is short, so a
missing slot counts as a miss. Approximate-neighbor recall compares id
sets against the exact oracle; there a missing slot is simply absent.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .ivf import SearchResult, brute_force_knn, build, search


def label_precision(result: SearchResult, query_labels, base_labels, k) -> float:
    """Mean fraction of the first k returned ids whose label matches the query."""
    if len(result) == 0:
        raise ConfigError("label precision over zero queries is undefined")
    if k < 1 or k > result.k:
        raise ConfigError(f"k must lie in [1, {result.k}], got {k}")
    query_labels = np.asarray(query_labels)
    base_labels = np.asarray(base_labels)
    ids = result.indices[:, :k]
    valid = ids >= 0
    hits = np.zeros(ids.shape, dtype=bool)
    hits[valid] = base_labels[ids[valid]] == np.broadcast_to(query_labels[:, None], ids.shape)[valid]
    return float(hits.sum(axis=1).mean() / k)


def anns_recall(approx: SearchResult, exact: SearchResult, k) -> float:
    """Mean overlap between approximate and exact top-k id sets, over k."""
    if len(approx) != len(exact):
        raise ConfigError(f"query count mismatch: {len(approx)} vs {len(exact)}")
    if len(approx) == 0:
        raise ConfigError("recall over zero queries is undefined")
    if k < 1 or k > approx.k or k > exact.k:
        raise ConfigError(f"k={k} exceeds a result width")
    total = 0.0
    for i in range(len(approx)):
        a = set(int(x) for x in approx.indices[i, :k] if x >= 0)
        e = set(int(x) for x in exact.indices[i, :k] if x >= 0)
        total += len(a & e) / k
    return float(total / len(approx))


def worst_case_lp(per_benchmark: dict):
    """(minimum value, its key); ties resolve to the lexically smaller key."""
    if not per_benchmark:
        raise ConfigError("worst_case_lp over an empty map is undefined")
    key = min(sorted(per_benchmark), key=lambda n: per_benchmark[n])
    return float(per_benchmark[key]), key


HIST_BINS = 50
HIST_RANGE = (0.0, 2.0)


@dataclass
class HistogramPair:
    """Counts over 50 uniform bins on [0, 2] for top-K vs background distances."""

    bin_edges: np.ndarray
    topk_counts: np.ndarray
    background_counts: np.ndarray
    topk_mean: float
    background_mean: float

    @property
    def separation(self):
        return self.background_mean - self.topk_mean

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["bin_lo", "bin_hi", "topk_count", "background_count"])
            for i in range(HIST_BINS):
                w.writerow(
                    [
                        repr(float(self.bin_edges[i])),
                        repr(float(self.bin_edges[i + 1])),
                        int(self.topk_counts[i]),
                        int(self.background_counts[i]),
                    ]
                )


def distance_histograms(base, queries, k, n_background=None, seed=0) -> HistogramPair:
    """Empirical distributions of exact top-K vs random base distances.

    n_background defaults to 10 per query. Unit-sphere distances live in
    [0, 2]; anything outside clips into the edge bins.
    """
    base_m = np.asarray(getattr(base, "vectors", base))
    query_m = np.asarray(getattr(queries, "vectors", queries))
    nq = query_m.shape[0]
    if nq == 0:
        raise ConfigError("need at least one query")
    if n_background is None:
        n_background = 10 * nq
    exact = brute_force_knn(base_m, query_m, k)
    topk = exact.distances.ravel()
    rng = np.random.default_rng(seed)
    qi = rng.integers(nq, size=n_background)
    bi = rng.integers(base_m.shape[0], size=n_background)
    diffs = base_m[bi] - query_m[qi]
    bg = np.sqrt((diffs.astype(np.float64) ** 2).sum(axis=1))
    edges = np.linspace(HIST_RANGE[0], HIST_RANGE[1], HIST_BINS + 1)
    topk_counts, _ = np.histogram(np.clip(topk, *HIST_RANGE), bins=edges)
    bg_counts, _ = np.histogram(np.clip(bg, *HIST_RANGE), bins=edges)
    return HistogramPair(edges, topk_counts, bg_counts, float(topk.mean()), float(bg.mean()))


@dataclass
class MetricsReport:
    """LP/AR over the (K, nprobe) grid plus run metadata."""

    lp: dict  # (k, nprobe) -> float
    ar: dict  # (k, nprobe) -> float
    ks: tuple
    nprobes: tuple
    metadata: dict = field(default_factory=dict)

    def to_json(self, path):
        payload = {
            "metadata": self.metadata,
            "ks": list(self.ks),
            "nprobes": list(self.nprobes),
            "lp": {f"k{k}_nprobe{p}": v for (k, p), v in sorted(self.lp.items())},
            "ar": {f"k{k}_nprobe{p}": v for (k, p), v in sorted(self.ar.items())},
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["k", "nprobe", "lp", "ar"])
            for k in self.ks:
                for p in self.nprobes:
                    w.writerow([k, p, repr(self.lp[(k, p)]), repr(self.ar[(k, p)])])

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            payload = json.load(f)
        ks = tuple(payload["ks"])
        nprobes = tuple(payload["nprobes"])
        lp = {(k, p): payload["lp"][f"k{k}_nprobe{p}"] for k in ks for p in nprobes}
        ar = {(k, p): payload["ar"][f"k{k}_nprobe{p}"] for k in ks for p in nprobes}
        return cls(lp, ar, ks, nprobes, payload.get("metadata", {}))


DEFAULT_KS = (1, 3, 5, 10)
DEFAULT_NPROBES = (1, 5, 10)


def evaluate_grid(
    base_vectors,
    base_labels,
    query_vectors,
    query_labels,
    nlist=10,
    nprobes=DEFAULT_NPROBES,
    ks=DEFAULT_KS,
    seed=0,
    metadata=None,
) -> MetricsReport:
    """Build one index, then fill the full LP/AR grid from max-K searches."""
    base_vectors = np.asarray(base_vectors)
    if max(ks) > base_vectors.shape[0]:
        raise ConfigError(f"K={max(ks)} exceeds base size {base_vectors.shape[0]}")
    index = build(base_vectors, nlist=nlist, seed=seed)
    kmax = max(ks)
    exact = brute_force_knn(base_vectors, query_vectors, kmax)
    lp, ar = {}, {}
    for p in nprobes:
        res = search(index, query_vectors, kmax, nprobe=p)
        for k in ks:
            lp[(k, p)] = label_precision(res, query_labels, base_labels, k)
            ar[(k, p)] = anns_recall(res, exact, k)
    return MetricsReport(lp, ar, tuple(ks), tuple(nprobes), metadata or {})
