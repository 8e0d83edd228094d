"""Inverted-file retrieval over raw vectors, plus the exact oracle.

The index is flat: k-means centroids partition the base set into posting
lists, and a query scans the nprobe nearest lists exhaustively. Probing
every list therefore degenerates to exact search, and the implementation
keeps that equality bit-for-bit by computing candidate distances with
the same expression as the brute-force path and breaking ties the same
way (smaller distance first, then smaller base index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

KMEANS_ITERS = 25


def _pairwise_sq(points, centers):
    """(n, k) squared distances, the k-means workhorse."""
    p = points.astype(np.float64, copy=False)
    c = centers.astype(np.float64, copy=False)
    diff = p[:, None, :] - c[None, :, :]
    return (diff * diff).sum(axis=2)


def _plus_plus_seed(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[rng.integers(n)]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining mass sits on existing centers; reuse any point
            centers[j] = points[rng.integers(n)]
            continue
        r = rng.uniform(0.0, total)
        idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
        idx = min(idx, n - 1)
        centers[j] = points[idx]
        closest = np.minimum(closest, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def kmeans(points, k, seed=0, iters=KMEANS_ITERS):
    """Lloyd's algorithm with distance-weighted seeding.

    Runs a fixed number of iterations; empty clusters are repaired each
    round by stealing the farthest member of the largest cluster. All
    ties break toward the lower index, so the result is deterministic.
    Returns (centroids, assignments).
    """
    points = np.asarray(points)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centers = _plus_plus_seed(points.astype(np.float64), k, rng)
    for _ in range(iters):
        d2 = _pairwise_sq(points, centers)
        assign = d2.argmin(axis=1)
        counts = np.bincount(assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            donor = int(counts.argmax())
            members = np.flatnonzero(assign == donor)
            far = members[int(d2[members, donor].argmax())]
            centers[j] = points[far]
            assign[far] = j
            counts[donor] -= 1
            counts[j] += 1
        for j in range(k):
            members = np.flatnonzero(assign == j)
            if members.size:
                centers[j] = points[members].mean(axis=0)
    # a plain argmin pass against the final centroids, so the returned
    # assignment is exactly nearest-centroid
    assign = _pairwise_sq(points, centers).argmin(axis=1)
    return centers.astype(np.float64), assign


def kmeans_inertia(points, centers, assign):
    d = points.astype(np.float64) - centers[assign]
    return float((d * d).sum())


@dataclass
class SearchResult:
    """Top-K ids and distances per query; -1 / inf pad short result lists."""

    indices: np.ndarray  # (q, K) int64
    distances: np.ndarray  # (q, K) float64

    @property
    def k(self):
        return self.indices.shape[1]

    def __len__(self):
        return self.indices.shape[0]


@dataclass
class IvfIndex:
    centroids: np.ndarray  # (nlist, d) float64
    lists: list  # posting lists of base indices
    base: np.ndarray  # (n, d) the indexed vectors

    @property
    def nlist(self):
        return self.centroids.shape[0]


def _as_matrix(x):
    v = getattr(x, "vectors", x)
    v = np.asarray(v)
    if v.ndim != 2:
        raise ConfigError(f"expected an (n, d) matrix, got shape {v.shape}")
    return v


def build(base, nlist=10, seed=0) -> IvfIndex:
    vectors = _as_matrix(base)
    if vectors.shape[0] == 0:
        raise ConfigError("cannot index an empty base set")
    centroids, assign = kmeans(vectors, nlist, seed=seed)
    lists = [np.flatnonzero(assign == j) for j in range(nlist)]
    return IvfIndex(centroids=centroids, lists=lists, base=vectors)


def _rank_topk(cand, dists, k):
    order = np.lexsort((cand, dists))[:k]
    return cand[order], dists[order]


def _candidate_dists(base, cand, q):
    return np.sqrt(((base[cand] - q) ** 2).sum(axis=1))


def search(index: IvfIndex, queries, k, nprobe) -> SearchResult:
    """Scan the nprobe closest posting lists per query."""
    q = _as_matrix(queries)
    if not 1 <= nprobe <= index.nlist:
        raise ConfigError(f"nprobe must lie in [1, {index.nlist}], got {nprobe}")
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    nq = q.shape[0]
    out_idx = np.full((nq, k), -1, dtype=np.int64)
    out_dist = np.full((nq, k), np.inf, dtype=np.float64)
    for i in range(nq):
        cd = np.sqrt(((index.centroids - q[i]) ** 2).sum(axis=1))
        probes = np.lexsort((np.arange(index.nlist), cd))[:nprobe]
        cand = np.concatenate([index.lists[j] for j in probes])
        if cand.size == 0:
            continue
        dists = _candidate_dists(index.base, cand, q[i])
        ids, ds = _rank_topk(cand, dists, k)
        out_idx[i, : ids.size] = ids
        out_dist[i, : ids.size] = ds
    return SearchResult(out_idx, out_dist)


def brute_force_knn(base, queries, k) -> SearchResult:
    """Exact top-K by exhaustive scan; the oracle the index is held to."""
    b = _as_matrix(base)
    q = _as_matrix(queries)
    if k < 1 or k > b.shape[0]:
        raise ConfigError(f"k must lie in [1, {b.shape[0]}], got {k}")
    nq = q.shape[0]
    out_idx = np.empty((nq, k), dtype=np.int64)
    out_dist = np.empty((nq, k), dtype=np.float64)
    cand = np.arange(b.shape[0])
    for i in range(nq):
        dists = _candidate_dists(b, cand, q[i])
        ids, ds = _rank_topk(cand, dists, k)
        out_idx[i] = ids
        out_dist[i] = ds
    return SearchResult(out_idx, out_dist)
