"""Vector primitives with hand-derived gradients.

Every nonlinearity used by the adapters lives here, paired with its
analytic derivative so the backward passes never rely on autodiff.
Training runs in float32; float64 is reserved for gradient checks,
where single precision drowns the finite-difference signal.

All functions operate on the last axis and accept single vectors (d,)
or batches (..., d).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateNormError

DTYPE = np.float32
CHECK_DTYPE = np.float64

# Norms at or below this are refused rather than normalized into noise.
NORM_EPS = 1e-12

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def gelu(x):
    """Tanh-approximated GELU."""
    x = np.asarray(x)
    inner = _GELU_C * (x + _GELU_A * x**3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def gelu_grad(x):
    """Derivative of :func:`gelu` at x."""
    x = np.asarray(x)
    inner = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(inner)
    # d/dx [0.5 x (1 + tanh(u))] = 0.5 (1 + t) + 0.5 x (1 - t^2) u'
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * _GELU_C * (1.0 + 3.0 * _GELU_A * x**2)


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x)
    out = np.empty_like(x, dtype=x.dtype if x.dtype.kind == "f" else np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(x):
    s = sigmoid(x)
    return s * (1.0 - s)


def l2_norms(x, keepdims=False):
    """Row L2 norms along the last axis."""
    x = np.asarray(x)
    return np.sqrt((x * x).sum(axis=-1, keepdims=keepdims))


def l2_normalize(x):
    """Project rows onto the unit sphere.

    Raises DegenerateNormError if any row norm falls at or below NORM_EPS;
    there is no meaningful direction to return for those.
    """
    x = np.asarray(x)
    norms = l2_norms(x, keepdims=True)
    if np.any(norms <= NORM_EPS):
        raise DegenerateNormError(
            f"cannot normalize vector with norm <= {NORM_EPS:g} (min norm {norms.min():g})"
        )
    return x / norms


def l2_normalize_jvp(x, v):
    """Directional derivative of l2_normalize at x along v.

    With y = x/||x||, the Jacobian action is (v - (y.v) y) / ||x||; the
    same expression serves as the VJP because the Jacobian is symmetric.
    """
    x = np.asarray(x)
    v = np.asarray(v)
    norms = l2_norms(x, keepdims=True)
    if np.any(norms <= NORM_EPS):
        raise DegenerateNormError("normalize JVP at a degenerate point")
    y = x / norms
    coef = (y * v).sum(axis=-1, keepdims=True)
    return (v - coef * y) / norms


l2_normalize_vjp = l2_normalize_jvp


def euclidean_distance(a, b):
    """Pointwise Euclidean distance along the last axis."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    diff = a - b
    return np.sqrt((diff * diff).sum(axis=-1))


def matvec(w, x):
    """Apply matrix w to the last axis of x (w: (m, n), x: (..., n))."""
    w = np.asarray(w)
    x = np.asarray(x)
    if w.ndim != 2:
        raise ValueError(f"matvec expects a 2-d matrix, got shape {w.shape}")
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"matvec shape mismatch: {w.shape} @ {x.shape}")
    return x @ w.T


def require_finite(x, what="array"):
    """Raise NumericError if x holds NaN or inf."""
    from .errors import NumericError

    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")
    return x
