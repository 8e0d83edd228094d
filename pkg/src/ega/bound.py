"""Drift measurement and the update-budget bound eta * L * G * sum(rho).

The chain under test: per-step parameter motion is at most
eta * rho_t * G_t, because only active triples push and none pushes
harder than G_t; a unit of parameter motion moves an unseen output by at
most the map's sensitivity L; so cumulative drift is bounded by
eta * L_hat * G_hat * sum_t rho_t. For trained adapters L_hat is the
power-iteration estimate of the input-output Jacobian's top singular
value over held-out probes. The linear illustration at the bottom of the
module instead computes every constant in closed form, which makes the
inequality exact rather than estimated.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .adapters import (
    AdapterConfig,
    adapter_backward,
    adapter_forward_cached,
    adapter_input_jvp,
    adapter_input_vjp,
    flatten_params,
    param_jacobian,
)
from .errors import ConfigError
from .losses import TripletBatch, triplet_loss
from .tensor import NORM_EPS
from .training import TrainConfig, TrainTelemetry, sample_triplets

log = logging.getLogger(__name__)


@dataclass
class LipschitzEstimate:
    value: float
    per_probe: np.ndarray
    converged: bool


def estimate_lipschitz(params, cfg: AdapterConfig, probes, n_iters=20, tol=1e-6, seed=0):
    """Largest input-output singular value of the adapter at each probe.

    Power iteration on J^T J with the analytic JVP/VJP pair, batched over
    probes (every operation involved is row-local).
    """
    probes = np.asarray(probes)
    if probes.ndim != 2 or probes.shape[0] == 0:
        raise ConfigError("need a non-empty (m, d) probe matrix")
    _, cache = adapter_forward_cached(probes, params, cfg)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=probes.shape).astype(probes.dtype)
    v /= np.sqrt((v * v).sum(axis=1, keepdims=True))
    sigma = np.zeros(probes.shape[0])
    converged = False
    for _ in range(n_iters):
        u = adapter_input_jvp(cache, v, params, cfg)
        new_sigma = np.sqrt((u.astype(np.float64) ** 2).sum(axis=1))
        w = adapter_input_vjp(cache, u, params, cfg)
        wn = np.sqrt((w * w).sum(axis=1, keepdims=True))
        v = np.where(wn > NORM_EPS, w / np.maximum(wn, NORM_EPS), v)
        converged = bool(np.all(np.abs(new_sigma - sigma) <= tol * np.maximum(new_sigma, 1.0)))
        sigma = new_sigma
    if not converged:
        log.warning("power iteration did not reach tol=%g in %d iterations", tol, n_iters)
    return LipschitzEstimate(float(sigma.max()), sigma, converged)


def measure_drift(trajectory, probes, cfg: AdapterConfig):
    """Per-checkpoint [epoch, mean, max] output displacement on the probes.

    The reference is the epoch-0 entry of the trajectory, so the first
    row is exactly zero.
    """
    if not trajectory or trajectory[0][0] != 0:
        raise ConfigError("trajectory must start with the epoch-0 checkpoint")
    probes = np.asarray(probes)
    ref, _ = adapter_forward_cached(probes, trajectory[0][1], cfg)
    ref = ref.astype(np.float64)
    rows = []
    for epoch, params in trajectory:
        out, _ = adapter_forward_cached(probes, params, cfg)
        d = np.sqrt(((out.astype(np.float64) - ref) ** 2).sum(axis=1))
        rows.append((int(epoch), float(d.mean()), float(d.max())))
    return rows


@dataclass
class BoundEstimate:
    """The four factors of the drift budget and their product."""

    eta: float
    l_hat: float
    g_hat: float
    rho_integral: float

    def __post_init__(self):
        for name in ("eta", "l_hat", "g_hat", "rho_integral"):
            v = getattr(self, name)
            if np.isfinite(v) and v < 0:
                raise ConfigError(f"{name} must be non-negative, got {v}")

    @property
    def value(self):
        return float(self.eta * self.l_hat * self.g_hat * self.rho_integral)


def compute_bound(telemetry: TrainTelemetry, l_hat, eta=None, g_hat=None, rho_one=False) -> BoundEstimate:
    """Drift budget eta * L * G * sum(rho) from logged telemetry.

    rho_one swaps the measured activity for one unit per step, the
    dense-loss proxy; g_hat overrides the logged per-triple norm cap for
    runs that record none.
    """
    if len(telemetry) == 0:
        raise ConfigError("telemetry holds no steps")
    if eta is None:
        eta = max(telemetry.lr)
    rho_int = float(len(telemetry)) if rho_one else float(np.sum(telemetry.rho))
    if g_hat is None:
        g = np.asarray(telemetry.max_triplet_grad_norm)
        g = g[np.isfinite(g)]
        g_hat = float(g.max()) if g.size else 0.0
    return BoundEstimate(eta=float(eta), l_hat=float(l_hat), g_hat=float(g_hat), rho_integral=rho_int)


@dataclass
class BoundRow:
    epoch: int
    mean_drift: float
    max_drift: float
    rho_integral: float
    l_hat: float
    g_hat: float
    bound_value: float


BOUND_COLUMNS = ("epoch", "mean_drift", "max_drift", "rho_integral", "l_hat", "g_hat", "bound_value")


def write_bound_csv(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(BOUND_COLUMNS)
        for r in rows:
            w.writerow(
                [r.epoch]
                + [repr(x) for x in (r.mean_drift, r.max_drift, r.rho_integral, r.l_hat, r.g_hat, r.bound_value)]
            )


def bound_report(
    trajectory,
    telemetry: TrainTelemetry,
    probes,
    cfg: AdapterConfig,
    eta=None,
    g_hat=None,
    rho_one=False,
    power_iters=20,
    seed=0,
):
    """Assemble drift vs running bound per checkpoint.

    eta defaults to the peak scheduled learning rate. g_hat overrides the
    telemetry-derived per-triple norm cap (needed for runs that do not
    log one), and rho_one replaces the measured activity integral with
    one unit per step, the dense-loss proxy.
    """
    if eta is None:
        if not telemetry.lr:
            raise ConfigError("telemetry holds no steps; pass eta explicitly")
        eta = max(telemetry.lr)
    drift = measure_drift(trajectory, probes, cfg)
    epochs = np.asarray(telemetry.epoch)
    gnorms = np.asarray(telemetry.max_triplet_grad_norm)
    rows = []
    l_run = 0.0
    g_run = 0.0
    for (epoch, params), (_, mean_d, max_d) in zip(trajectory, drift):
        est = estimate_lipschitz(params, cfg, probes, n_iters=power_iters, seed=seed)
        l_run = max(l_run, est.value)
        upto = epochs <= epoch
        if rho_one:
            rho_int = float(upto.sum())
        else:
            rho_int = float(np.asarray(telemetry.rho)[upto].sum())
        if g_hat is not None:
            g_here = g_hat
        else:
            seen = gnorms[upto]
            seen = seen[np.isfinite(seen)]
            g_here = float(seen.max()) if seen.size else 0.0
        g_run = max(g_run, g_here)
        rows.append(
            BoundRow(
                epoch=epoch,
                mean_drift=mean_d,
                max_drift=max_d,
                rho_integral=rho_int,
                l_hat=l_run,
                g_hat=g_run,
                bound_value=float(eta * l_run * g_run * rho_int),
            )
        )
    return rows


def collect_active_grads(vectors, labels, params, cfg: AdapterConfig, train_cfg: TrainConfig, max_count=256):
    """Flattened parameter gradients of the most recent active triples.

    Replays one deterministic epoch at fixed parameters and keeps the
    last max_count active per-triple gradients, the raw material for the
    active-subspace projector.
    """
    vectors = np.asarray(vectors, dtype=np.float32)
    labels = np.asarray(labels)
    rng = np.random.default_rng(train_cfg.seed)
    kept = []
    for lo in range(0, vectors.shape[0], train_cfg.batch_size):
        idx = np.arange(lo, min(lo + train_cfg.batch_size, vectors.shape[0]))
        if idx.size < 2:
            continue
        zb = vectors[idx]
        yb, _ = adapter_forward_cached(zb, params, cfg)
        tb = sample_triplets(labels[idx], rng, train_cfg.margin)
        if len(tb) == 0:
            continue
        triplet_loss(yb, tb)  # populates tb.active_mask
        for t in np.flatnonzero(tb.active_mask):
            rows = np.array([tb.anchors[t], tb.positives[t], tb.negatives[t]])
            z3 = zb[rows]
            y3, cache3 = adapter_forward_cached(z3, params, cfg)
            a, p, nvec = y3
            dap = float(np.sqrt(((a - p) ** 2).sum()))
            dan = float(np.sqrt(((a - nvec) ** 2).sum()))
            gap = (a - p) / dap if dap > NORM_EPS else np.zeros_like(a)
            gan = (a - nvec) / dan if dan > NORM_EPS else np.zeros_like(a)
            upstream = np.stack([gap - gan, -gap, gan])
            grads, _ = adapter_backward(cache3, upstream, params, cfg)
            kept.append(flatten_params(grads))
            if len(kept) > max_count:
                kept.pop(0)
    return np.asarray(kept)


def active_subspace_ratios(grad_vectors, probes, params, cfg: AdapterConfig, rank_tol=1e-10):
    """sigma_max(J P) / sigma_max(J) per probe.

    P projects onto the span of the collected active-triple gradients; a
    ratio near 1 means parameter directions that matter for the probe
    are the same ones training actually pushed.
    """
    g = np.asarray(grad_vectors, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] == 0:
        raise ConfigError("need a non-empty (k, P) gradient matrix")
    q, r = np.linalg.qr(g.T)
    keep = np.abs(np.diag(r)) > rank_tol * max(1.0, np.abs(np.diag(r)).max())
    q = q[:, keep]
    ratios = []
    for x in np.asarray(probes):
        j = param_jacobian(x, params, cfg).astype(np.float64)
        full = math.sqrt(max(float(np.linalg.eigvalsh(j @ j.T)[-1]), 0.0))
        if full <= 0:
            continue
        jq = j @ q
        proj = math.sqrt(max(float(np.linalg.eigvalsh(jq @ jq.T)[-1]), 0.0))
        ratios.append(proj / full)
    if not ratios:
        raise ConfigError("all probe Jacobians vanished; no ratio to report")
    return np.asarray(ratios)


# ---------------------------------------------------------------------------
# Linear illustration: one matrix, unit circle data, every constant exact.
# ---------------------------------------------------------------------------


@dataclass
class LinearCheckpoint:
    step: int
    rho_integral: float
    drift: float  # max over the held-out probes
    bound: float


@dataclass
class LinearReport:
    """Exact bound walkthrough for f(z) = normalize(z + W z) under SGD.

    Training data sits exactly in the plane spanned by the first two
    coordinates, so W's row and column spaces stay in that plane and a
    purely orthogonal probe cannot move at all.
    """

    d: int
    n_steps: int
    eta: float
    margin: float
    checkpoints: list
    rho_series: list
    in_span_component: float
    orth_component: float
    orthogonal_probe_drift: float
    row_space_alignment: float
    top_singular_alignment: float
    probe_drift: float
    bound_final: float

    def to_json(self, path):
        payload = {
            "d": self.d,
            "n_steps": self.n_steps,
            "eta": self.eta,
            "margin": self.margin,
            "rho_series": self.rho_series,
            "in_span_component": self.in_span_component,
            "orth_component": self.orth_component,
            "orthogonal_probe_drift": self.orthogonal_probe_drift,
            "row_space_alignment": self.row_space_alignment,
            "top_singular_alignment": self.top_singular_alignment,
            "probe_drift": self.probe_drift,
            "bound_final": self.bound_final,
            "checkpoints": [
                {"step": c.step, "rho_integral": c.rho_integral, "drift": c.drift, "bound": c.bound}
                for c in self.checkpoints
            ],
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step", "rho_integral", "drift", "bound"])
            for c in self.checkpoints:
                w.writerow([c.step, repr(c.rho_integral), repr(c.drift), repr(c.bound)])


def _circle_data(rng, d, n_per_class, centers, spread):
    angles = np.concatenate([c + spread * rng.normal(size=n_per_class) for c in centers])
    z = np.zeros((angles.size, d))
    z[:, 0] = np.cos(angles)
    z[:, 1] = np.sin(angles)
    labels = np.repeat(np.arange(len(centers)), n_per_class)
    return z, labels


def _linear_forward(z, w):
    v = z + z @ w.T
    vn = np.sqrt((v * v).sum(axis=1, keepdims=True))
    if np.any(vn <= NORM_EPS):
        raise ConfigError("linear map collapsed a sample; lower eta")
    return v / vn, v, vn


def linear_illustration(
    seed=0,
    d=16,
    n_per_class=48,
    n_steps=150,
    eta=0.1,
    margin=0.2,
    center_gap=0.35,
    spread=0.12,
    checkpoint_every=10,
) -> LinearReport:
    """Train W by SGD on in-plane triplets and certify the drift bound.

    Per step the parameter moves by eta * ||grad||_F, ||grad||_F is at
    most rho_t * G_t (triangle inequality over active triples), and a
    unit of parameter motion moves a probe by at most
    1 / min(||v_t||, ||v_{t+1}||) along the straight segment (the norm of
    an affine path is convex, so its minimum sits at an endpoint). The
    reported bound uses running maxima, matching eta*L*G*sum(rho).
    """
    rng = np.random.default_rng(seed)
    z, labels = _circle_data(rng, d, n_per_class, (0.0, center_gap), spread)
    w = np.zeros((d, d))

    bisector = 0.5 * center_gap
    probe_mid = np.zeros(d)
    probe_mid[0], probe_mid[1] = math.cos(bisector), math.sin(bisector)
    # held-out probe at 60 degrees out of the data plane, plus the fully
    # orthogonal axis
    elev = math.radians(60.0)
    probe_60 = math.cos(elev) * probe_mid
    probe_60[2] = math.sin(elev)
    probe_orth = np.zeros(d)
    probe_orth[2] = 1.0
    probes = np.stack([probe_60, probe_orth])

    y0, _, _ = _linear_forward(probes, w)
    checkpoints = [LinearCheckpoint(0, 0.0, 0.0, 0.0)]
    rho_series = []
    rho_int = 0.0
    l_run = 0.0
    g_run = 0.0

    def probe_min_vnorm(mat):
        _, _, vn = _linear_forward(probes, mat)
        return float(vn.min())

    for step in range(1, n_steps + 1):
        y, v, vn = _linear_forward(z, w)
        tb = sample_triplets(labels, rng, margin)
        out = triplet_loss(y, tb)
        rho = out.active_count / len(tb)
        rho_series.append(rho)
        rho_int += rho

        # exact per-triple parameter-gradient norms (3x3 Gram)
        g_t = 0.0
        dv_all = (out.grads - (out.grads * y).sum(axis=1, keepdims=True) * y) / vn
        if out.active_count:
            a_idx = np.flatnonzero(tb.active_mask)
            ya = y[tb.anchors[a_idx]]
            yp = y[tb.positives[a_idx]]
            yn = y[tb.negatives[a_idx]]
            dap = np.sqrt(((ya - yp) ** 2).sum(axis=1, keepdims=True))
            dan = np.sqrt(((ya - yn) ** 2).sum(axis=1, keepdims=True))
            gap = (ya - yp) / dap
            gan = (ya - yn) / dan
            ups = np.stack([gap - gan, -gap, gan], axis=1)  # (g, 3, d)
            rows = np.stack([tb.anchors[a_idx], tb.positives[a_idx], tb.negatives[a_idx]], axis=1)
            dvs = (ups - (ups * y[rows]).sum(axis=2, keepdims=True) * y[rows]) / vn[rows]
            dgram = np.einsum("gmd,gnd->gmn", dvs, dvs)
            zgram = np.einsum("gmd,gnd->gmn", z[rows], z[rows])
            g_t = float(np.sqrt((dgram * zgram).sum(axis=(1, 2)).max()))
        g_run = max(g_run, g_t)

        grad_w = np.einsum("nd,ne->de", dv_all, z)
        vmin_before = probe_min_vnorm(w)
        w = w - eta * grad_w
        vmin_after = probe_min_vnorm(w)
        l_run = max(l_run, 1.0 / min(vmin_before, vmin_after))

        if step % checkpoint_every == 0 or step == n_steps:
            yt, _, _ = _linear_forward(probes, w)
            drift = float(np.sqrt(((yt - y0) ** 2).sum(axis=1)).max())
            checkpoints.append(
                LinearCheckpoint(step, rho_int, drift, float(eta * l_run * g_run * rho_int))
            )

    yt, _, _ = _linear_forward(probes, w)
    delta_60 = yt[0] - y0[0]
    in_span = float(np.sqrt(delta_60[0] ** 2 + delta_60[1] ** 2))
    orth = float(np.sqrt((delta_60[2:] ** 2).sum()))
    orth_drift = float(np.sqrt(((yt[1] - y0[1]) ** 2).sum()))
    wnorm = float(np.sqrt((w**2).sum()))
    plane_mass = float(np.sqrt((w[:, :2] ** 2).sum()))
    alignment = plane_mass / wnorm if wnorm > 0 else 1.0
    if wnorm > 0:
        _, _, vt = np.linalg.svd(w)
        v1 = vt[0]
        top_alignment = float(np.sqrt(v1[0] ** 2 + v1[1] ** 2))
    else:
        top_alignment = 1.0
    return LinearReport(
        d=d,
        n_steps=n_steps,
        eta=eta,
        margin=margin,
        checkpoints=checkpoints,
        rho_series=rho_series,
        in_span_component=in_span,
        orth_component=orth,
        orthogonal_probe_drift=orth_drift,
        row_space_alignment=alignment,
        top_singular_alignment=top_alignment,
        probe_drift=float(np.sqrt((delta_60**2).sum())),
        bound_final=checkpoints[-1].bound,
    )
