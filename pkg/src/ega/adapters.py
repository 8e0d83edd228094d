"""Sphere-preserving residual adapters with hand-derived backward passes.

Two variants share one interface:

* "ega": two gated residual blocks followed by a square refinement map,

      gate(z)  = z * sigmoid(W2 gelu(W1 z + b1) + b2)        (bottleneck d/4)
      block(z) = z + W_out gelu(W_in gate(z) + b_in) + b_out
      out      = l2_normalize(R block2(block1(z)) + b_r)

  Zero-initializing W_out/b_out and setting R to the identity makes the
  whole map the exact identity on unit vectors, so training starts from
  the frozen geometry and learns only a correction.

* "lora": out = l2_normalize(z + B A z), a rank-r update with B zero at
  init so it, too, starts as the identity.

Batches are rows: (n, d); single vectors (d,) are also accepted. All
parameter-gradient reductions run in fixed index order, so repeated runs
are bit-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataFormatError, DegenerateNormError, VariantMismatchError
from .tensor import (
    DTYPE,
    NORM_EPS,
    gelu,
    gelu_grad,
    require_finite,
    sigmoid,
)

INPUT_NORM_TOL = 1e-4

PARAMS_MAGIC = b"EGAP"
PARAMS_VERSION = 1
_VARIANT_TAGS = {"ega": 0, "lora": 1}


@dataclass
class AdapterConfig:
    variant: str = "ega"
    d: int = 512
    h: int = 2048
    r: int = 128
    use_residual: bool = True
    use_zero_init: bool = True
    use_l2_norm: bool = True
    seed: int = 0

    def validate(self):
        if self.variant not in _VARIANT_TAGS:
            raise ConfigError(f"unknown adapter variant {self.variant!r}")
        if self.d < 4 or self.d % 4 != 0:
            raise ConfigError(f"d must be a positive multiple of 4, got {self.d}")
        if self.variant == "ega" and self.h < 1:
            raise ConfigError(f"hidden width must be positive, got {self.h}")
        if self.variant == "lora" and not 1 <= self.r <= self.d:
            raise ConfigError(f"rank must lie in [1, d], got {self.r}")
        if not self.use_residual and self.use_zero_init:
            raise ConfigError(
                "zero-initialized adapter without the residual path is identically "
                "zero and cannot be normalized; disable zero init as well"
            )
        return self


@dataclass
class EgaBlock:
    w_in: np.ndarray  # (h, d)
    b_in: np.ndarray  # (h,)
    w_out: np.ndarray  # (d, h)
    b_out: np.ndarray  # (d,)
    w1: np.ndarray  # (d/4, d)
    b1: np.ndarray  # (d/4,)
    w2: np.ndarray  # (d, d/4)
    b2: np.ndarray  # (d,)

    def arrays(self):
        return [self.w_in, self.b_in, self.w_out, self.b_out, self.w1, self.b1, self.w2, self.b2]


@dataclass
class EgaParams:
    blocks: list
    refine_w: np.ndarray  # (d, d)
    refine_b: np.ndarray  # (d,)

    variant = "ega"

    def arrays(self):
        out = []
        for b in self.blocks:
            out.extend(b.arrays())
        out.extend([self.refine_w, self.refine_b])
        return out

    def copy(self):
        return EgaParams(
            [EgaBlock(*[a.copy() for a in b.arrays()]) for b in self.blocks],
            self.refine_w.copy(),
            self.refine_b.copy(),
        )

    @property
    def d(self):
        return self.refine_w.shape[0]

    @property
    def h(self):
        return self.blocks[0].w_in.shape[0]

    def n_params(self):
        return sum(a.size for a in self.arrays())


@dataclass
class LoraParams:
    a: np.ndarray  # (r, d)
    b: np.ndarray  # (d, r)

    variant = "lora"

    def arrays(self):
        return [self.a, self.b]

    def copy(self):
        return LoraParams(self.a.copy(), self.b.copy())

    @property
    def d(self):
        return self.b.shape[0]

    @property
    def r(self):
        return self.a.shape[0]

    def n_params(self):
        return self.a.size + self.b.size


def _kaiming_uniform(rng, shape, dtype):
    bound = np.sqrt(6.0 / shape[1])
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def ega_init(cfg: AdapterConfig, dtype=DTYPE) -> EgaParams:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    d, h, db = cfg.d, cfg.h, cfg.d // 4
    blocks = []
    for _ in range(2):
        w_in = _kaiming_uniform(rng, (h, d), dtype)
        w_out = np.zeros((d, h), dtype) if cfg.use_zero_init else _kaiming_uniform(rng, (d, h), dtype)
        w1 = _kaiming_uniform(rng, (db, d), dtype)
        w2 = _kaiming_uniform(rng, (d, db), dtype)
        blocks.append(
            EgaBlock(
                w_in=w_in,
                b_in=np.zeros(h, dtype),
                w_out=w_out,
                b_out=np.zeros(d, dtype),
                w1=w1,
                b1=np.zeros(db, dtype),
                w2=w2,
                b2=np.zeros(d, dtype),
            )
        )
    refine_w = np.eye(d, dtype=dtype) if cfg.use_zero_init else _kaiming_uniform(rng, (d, d), dtype)
    return EgaParams(blocks, refine_w, np.zeros(d, dtype))


def lora_init(cfg: AdapterConfig, dtype=DTYPE) -> LoraParams:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    a = (rng.normal(size=(cfg.r, cfg.d)) / np.sqrt(cfg.d)).astype(dtype)
    b = np.zeros((cfg.d, cfg.r), dtype)
    return LoraParams(a, b)


def init_adapter(cfg: AdapterConfig, dtype=DTYPE):
    return ega_init(cfg, dtype) if cfg.variant == "ega" else lora_init(cfg, dtype)


def zeros_like_params(params):
    if isinstance(params, EgaParams):
        return EgaParams(
            [EgaBlock(*[np.zeros_like(a) for a in b.arrays()]) for b in params.blocks],
            np.zeros_like(params.refine_w),
            np.zeros_like(params.refine_b),
        )
    return LoraParams(np.zeros_like(params.a), np.zeros_like(params.b))


def flatten_params(params):
    return np.concatenate([a.ravel() for a in params.arrays()])


def gate_forward(h, w1, w2, b1=None, b2=None):
    """Self-gate: h * sigmoid(w2 gelu(w1 h + b1) + b2)."""
    h = np.asarray(h)
    s = h @ w1.T
    if b1 is not None:
        s = s + b1
    q = gelu(s) @ w2.T
    if b2 is not None:
        q = q + b2
    return h * sigmoid(q)


def _check_unit_input(z):
    norms = np.sqrt((z * z).sum(axis=-1))
    if np.any(np.abs(norms - 1.0) > INPUT_NORM_TOL):
        worst = float(np.abs(norms - 1.0).max())
        raise ConfigError(
            f"adapter input rows must be unit vectors (worst deviation {worst:g})"
        )


def _as_rows(z):
    z = np.asarray(z)
    if z.ndim == 1:
        return z[None, :], True
    if z.ndim != 2:
        raise ValueError(f"adapter input must be (d,) or (n, d), got shape {z.shape}")
    return z, False


@dataclass
class ForwardCache:
    """Per-row activations retained for the backward pass."""

    z: np.ndarray
    blocks: list  # per block: dict(z_in, s, ag, gs, g, u, a)
    refine_in: np.ndarray
    t: np.ndarray | None  # lora bottleneck activations
    v: np.ndarray  # pre-normalization output
    vnorm: np.ndarray | None  # (n, 1) norms when l2 is applied
    y: np.ndarray
    squeeze: bool


def _ega_block_forward(z, blk: EgaBlock, use_residual):
    s = z @ blk.w1.T + blk.b1
    ag = gelu(s)
    gs = sigmoid(ag @ blk.w2.T + blk.b2)
    g = z * gs
    u = g @ blk.w_in.T + blk.b_in
    a = gelu(u)
    r = a @ blk.w_out.T + blk.b_out
    out = z + r if use_residual else r
    return out, dict(z_in=z, s=s, ag=ag, gs=gs, g=g, u=u, a=a)


def _finish(v, use_l2_norm):
    if not use_l2_norm:
        return v, None
    vnorm = np.sqrt((v * v).sum(axis=-1, keepdims=True))
    if np.any(vnorm <= NORM_EPS):
        raise DegenerateNormError(
            f"adapter output collapsed to norm <= {NORM_EPS:g}; cannot normalize"
        )
    return v / vnorm, vnorm


def adapter_forward_cached(z, params, cfg: AdapterConfig, check_input=True):
    """Forward pass that also returns the activations needed by backward."""
    z, squeeze = _as_rows(z)
    if z.shape[1] != cfg.d:
        raise ConfigError(f"input dimension {z.shape[1]} does not match configured d={cfg.d}")
    if check_input:
        _check_unit_input(z)
    if isinstance(params, EgaParams):
        x = z
        caches = []
        for blk in params.blocks:
            x, c = _ega_block_forward(x, blk, cfg.use_residual)
            caches.append(c)
        v = x @ params.refine_w.T + params.refine_b
        y, vnorm = _finish(v, cfg.use_l2_norm)
        cache = ForwardCache(z, caches, refine_in=x, t=None, v=v, vnorm=vnorm, y=y, squeeze=squeeze)
    else:
        t = z @ params.a.T
        v = z + t @ params.b.T
        y, vnorm = _finish(v, cfg.use_l2_norm)
        cache = ForwardCache(z, [], refine_in=z, t=t, v=v, vnorm=vnorm, y=y, squeeze=squeeze)
    require_finite(y, "adapter output")
    return (y[0] if squeeze else y), cache


def adapter_forward(z, params, cfg: AdapterConfig, check_input=True):
    y, _ = adapter_forward_cached(z, params, cfg, check_input=check_input)
    return y


def ega_forward(z, params: EgaParams, cfg: AdapterConfig, check_input=True):
    return adapter_forward(z, params, cfg, check_input=check_input)


def lora_forward(z, params: LoraParams, cfg: AdapterConfig, check_input=True):
    return adapter_forward(z, params, cfg, check_input=check_input)


def _l2_backward(cache, dy):
    if cache.vnorm is None:
        return dy
    y = cache.v / cache.vnorm
    coef = (dy * y).sum(axis=-1, keepdims=True)
    return (dy - coef * y) / cache.vnorm


def _gathered(cache, rows):
    """View of a cache restricted to row groups (rows may be (...,) fancy index)."""
    sub = ForwardCache(
        z=cache.z[rows],
        blocks=[{k: v[rows] for k, v in c.items()} for c in cache.blocks],
        refine_in=cache.refine_in[rows],
        t=None if cache.t is None else cache.t[rows],
        v=cache.v[rows],
        vnorm=None if cache.vnorm is None else cache.vnorm[rows],
        y=None,
        squeeze=False,
    )
    return sub


def _row_deltas(cache, upstream, params, cfg):
    """Shape-agnostic core of the backward pass.

    Returns (pairs, dz) where pairs lists (delta, activation) for each
    weight matrix in declaration order; the delta alone is the bias
    gradient row. Works for (n, d) and (g, m, d) upstreams alike.
    """
    dv = _l2_backward(cache, upstream)
    if isinstance(params, LoraParams):
        dt = dv @ params.b
        dz = dv + dt @ params.a
        return [(dt, cache.z), (dv, cache.t)], dz

    delta_r = dv
    dout = dv @ params.refine_w
    pairs = [None, None, (delta_r, cache.refine_in)]
    for i in (1, 0):
        blk = params.blocks[i]
        c = cache.blocks[i]
        dr = dout
        da = dr @ blk.w_out
        du = da * gelu_grad(c["u"])
        dg = du @ blk.w_in
        dgs = dg * c["z_in"]
        dq = dgs * c["gs"] * (1.0 - c["gs"])
        dag = dq @ blk.w2
        ds = dag * gelu_grad(c["s"])
        dz_in = dg * c["gs"] + ds @ blk.w1
        if cfg.use_residual:
            dz_in = dz_in + dout
        pairs[i] = [
            (du, c["g"]),  # w_in
            (dr, c["a"]),  # w_out
            (ds, c["z_in"]),  # w1
            (dq, c["ag"]),  # w2
        ]
        dout = dz_in
    return pairs, dout


def adapter_backward(cache: ForwardCache, upstream, params, cfg: AdapterConfig):
    """Parameter gradients plus the input gradient for a cached forward.

    upstream has the output's shape; gradients are summed over rows in
    fixed order (einsum over the row axis), never averaged.
    """
    if cache is None:
        raise ValueError("backward requires the cache returned by adapter_forward_cached")
    upstream = np.asarray(upstream)
    if upstream.ndim == 1:
        upstream = upstream[None, :]
    pairs, dz = _row_deltas(cache, upstream, params, cfg)
    if isinstance(params, LoraParams):
        (dt, z), (dv, t) = pairs
        grads = LoraParams(
            a=np.einsum("nr,nd->rd", dt, z),
            b=np.einsum("nd,nr->dr", dv, t),
        )
        return grads, (dz[0] if cache.squeeze else dz)

    gblocks = []
    for i in range(2):
        (du, g), (dr, a), (ds, z_in), (dq, ag) = pairs[i]
        gblocks.append(
            EgaBlock(
                w_in=np.einsum("nh,nd->hd", du, g),
                b_in=du.sum(axis=0),
                w_out=np.einsum("nd,nh->dh", dr, a),
                b_out=dr.sum(axis=0),
                w1=np.einsum("nk,nd->kd", ds, z_in),
                b1=ds.sum(axis=0),
                w2=np.einsum("nd,nk->dk", dq, ag),
                b2=dq.sum(axis=0),
            )
        )
    delta_r, refine_in = pairs[2]
    grads = EgaParams(
        gblocks,
        refine_w=np.einsum("nd,ne->de", delta_r, refine_in),
        refine_b=delta_r.sum(axis=0),
    )
    return grads, (dz[0] if cache.squeeze else dz)


def adapter_input_jvp(cache: ForwardCache, tangent, params, cfg: AdapterConfig):
    """Directional derivative of the output w.r.t. the input, at the cached point."""
    dz, squeeze = _as_rows(tangent)
    if isinstance(params, LoraParams):
        dt = dz @ params.a.T
        dv = dz + dt @ params.b.T
    else:
        for i in range(2):
            blk = params.blocks[i]
            c = cache.blocks[i]
            dsv = dz @ blk.w1.T
            dag = gelu_grad(c["s"]) * dsv
            dq = dag @ blk.w2.T
            dgs = c["gs"] * (1.0 - c["gs"]) * dq
            dg = dz * c["gs"] + c["z_in"] * dgs
            du = dg @ blk.w_in.T
            dr = (gelu_grad(c["u"]) * du) @ blk.w_out.T
            dz = dz + dr if cfg.use_residual else dr
        dv = dz @ params.refine_w.T
    if cache.vnorm is None:
        out = dv
    else:
        y = cache.v / cache.vnorm
        coef = (dv * y).sum(axis=-1, keepdims=True)
        out = (dv - coef * y) / cache.vnorm
    return out[0] if squeeze else out


def adapter_input_vjp(cache: ForwardCache, upstream, params, cfg: AdapterConfig):
    """Input gradient alone, skipping the parameter contractions."""
    upstream, squeeze = _as_rows(upstream)
    _, dz = _row_deltas(cache, upstream, params, cfg)
    return dz[0] if squeeze else dz


def group_grad_sq_norms(cache: ForwardCache, rows, upstreams, params, cfg: AdapterConfig):
    """Squared parameter-gradient norm per row group, without materializing them.

    rows is (g, m) int indices into the cached batch and upstreams is
    (g, m, d); group j's gradient is the sum over its m rows. Uses the
    Gram identity ||sum_j outer(delta_j, act_j)||_F^2 =
    sum_{j,k} (delta_j . delta_k)(act_j . act_k), computed in float64.
    """
    rows = np.asarray(rows)
    upstreams = np.asarray(upstreams)
    sub = _gathered(cache, rows)
    pairs, _ = _row_deltas(sub, upstreams, params, cfg)
    if isinstance(params, LoraParams):
        flat = pairs
    else:
        flat = list(pairs[0]) + list(pairs[1]) + [pairs[2]]
    sq = np.zeros(rows.shape[0], dtype=np.float64)
    for delta, act in flat:
        dgram = np.einsum("gma,gna->gmn", delta, delta, dtype=np.float64)
        agram = np.einsum("gma,gna->gmn", act, act, dtype=np.float64)
        sq += (dgram * agram).sum(axis=(1, 2))
        if isinstance(params, EgaParams):
            sq += dgram.sum(axis=(1, 2))  # the matching bias row
    return sq


def param_jacobian(z, params, cfg: AdapterConfig):
    """Dense (d, P) Jacobian of the output at a single input w.r.t. parameters.

    Built one output coordinate at a time from the backward pass; meant
    for instrumentation at small d, not for training.
    """
    z = np.asarray(z)
    if z.ndim != 1:
        raise ValueError("param_jacobian expects a single vector")
    _, cache = adapter_forward_cached(z, params, cfg)
    d = cfg.d
    rows = []
    for i in range(d):
        e = np.zeros(d, dtype=cache.v.dtype)
        e[i] = 1.0
        grads, _ = adapter_backward(cache, e, params, cfg)
        rows.append(flatten_params(grads))
    return np.stack(rows, axis=0)


def save_params(path, params, cfg: AdapterConfig):
    """Serialize parameters (float32 blocks in declaration order)."""
    cfg.validate()
    flags = (
        (1 if cfg.use_residual else 0)
        | (2 if cfg.use_zero_init else 0)
        | (4 if cfg.use_l2_norm else 0)
    )
    with open(path, "wb") as f:
        f.write(PARAMS_MAGIC)
        f.write(struct.pack("<IB", PARAMS_VERSION, _VARIANT_TAGS[cfg.variant]))
        if cfg.variant == "ega":
            f.write(struct.pack("<IIB", cfg.d, cfg.h, flags))
        else:
            f.write(struct.pack("<IIB", cfg.d, cfg.r, flags))
        for a in params.arrays():
            f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_params(path, variant=None):
    """Load a parameter file; returns (params, AdapterConfig).

    Passing variant asserts what the caller expects; a mismatch raises
    VariantMismatchError rather than silently reinterpreting bytes.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 9 or raw[:4] != PARAMS_MAGIC:
        raise DataFormatError(f"{path}: not a parameter file")
    version, tag = struct.unpack_from("<IB", raw, 4)
    if version != PARAMS_VERSION:
        raise DataFormatError(f"{path}: unsupported parameter version {version}")
    tags = {v: k for k, v in _VARIANT_TAGS.items()}
    if tag not in tags:
        raise DataFormatError(f"{path}: unknown variant tag {tag}")
    found = tags[tag]
    if variant is not None and variant != found:
        raise VariantMismatchError(f"{path}: holds {found!r} parameters, expected {variant!r}")
    d, hr, flags = struct.unpack_from("<IIB", raw, 9)
    off = 18
    cfg = AdapterConfig(
        variant=found,
        d=d,
        h=hr if found == "ega" else AdapterConfig.h,
        r=hr if found == "lora" else AdapterConfig.r,
        use_residual=bool(flags & 1),
        use_zero_init=bool(flags & 2),
        use_l2_norm=bool(flags & 4),
    )
    template = init_adapter(replace(cfg, seed=0))
    arrays = []
    for ref in template.arrays():
        n = ref.size
        if off + 4 * n > len(raw):
            raise DataFormatError(f"{path}: truncated parameter block")
        arrays.append(np.frombuffer(raw, dtype="<f4", count=n, offset=off).reshape(ref.shape).copy())
        off += 4 * n
    if off != len(raw):
        raise DataFormatError(f"{path}: {len(raw) - off} trailing bytes")
    if found == "ega":
        blocks = [EgaBlock(*arrays[i * 8 : (i + 1) * 8]) for i in range(2)]
        params = EgaParams(blocks, arrays[16], arrays[17])
    else:
        params = LoraParams(arrays[0], arrays[1])
    for a in params.arrays():
        require_finite(a, f"parameters in {path}")
    return params, cfg
