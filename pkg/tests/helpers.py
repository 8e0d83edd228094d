"""Shared oracles: finite differences, naive kNN, random-point factories.

Everything here is deliberately dumb and independent of the library's
own gradient/search code paths.
"""

import numpy as np


def rel_err(a, b, floor=1e-12):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / scale).max())


def random_unit(rng, shape):
    x = rng.normal(size=shape)
    return x / np.sqrt((x**2).sum(axis=-1, keepdims=True))


def fd_arrays_gradient(loss_fn, arrays, eps=1e-6):
    """Central finite differences of loss_fn() w.r.t. every array entry.

    loss_fn takes no arguments and reads the arrays by reference, so the
    perturbation happens in place and is undone afterwards.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a, dtype=np.float64)
        flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = loss_fn()
            flat[i] = orig - eps
            fm = loss_fn()
            flat[i] = orig
            g.reshape(-1)[i] = (fp - fm) / (2 * eps)
        grads.append(g)
    return grads


def fd_jvp(f, x, v, eps=1e-6):
    """Directional derivative (f(x+eps v) - f(x-eps v)) / 2eps."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return (np.asarray(f(x + eps * v), dtype=np.float64) - np.asarray(f(x - eps * v), dtype=np.float64)) / (2 * eps)


def naive_knn(base, queries, k):
    """O(N*Q) double-loop exact kNN with (distance, index) ordering."""
    base = np.asarray(base, dtype=np.float64)
    ids_out, d_out = [], []
    for q in np.asarray(queries, dtype=np.float64):
        scored = []
        for i, b in enumerate(base):
            scored.append((float(np.sqrt(((b - q) ** 2).sum())), i))
        scored.sort()
        ids_out.append([i for _, i in scored[:k]])
        d_out.append([d for d, _ in scored[:k]])
    return np.array(ids_out), np.array(d_out)
