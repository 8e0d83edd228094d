"""Metric-learning losses with exact active-set bookkeeping.

The triplet loss keeps the usual hinge semantics but is strict about two
details the rest of the harness depends on:

* A triple is active iff its violation is strictly positive. Inactive
  triples contribute bit-for-bit nothing: their rows are never touched
  during accumulation, so dropping them from the batch (with the
  denominator held fixed) reproduces the gradient exactly.
* The hinge kink uses the zero subgradient.

The supervised contrastive loss averages, over anchors that have at
least one in-batch positive, the mean over positives of
-log softmax(sim/tau); its gradient touches every batch member.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .tensor import NORM_EPS


@dataclass
class TripletBatch:
    """Index triples (anchor, positive, negative) into a shared embedding batch."""

    anchors: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    margin: float = 0.2
    active_mask: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=np.int64)
        self.positives = np.asarray(self.positives, dtype=np.int64)
        self.negatives = np.asarray(self.negatives, dtype=np.int64)
        if not (self.anchors.shape == self.positives.shape == self.negatives.shape):
            raise ConfigError("triplet index arrays must share one shape")
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")

    def __len__(self):
        return self.anchors.shape[0]


@dataclass
class LossOutput:
    value: float
    grads: np.ndarray  # (n, d) w.r.t. the embedding batch
    active_count: int


def triplet_loss(embeddings, batch: TripletBatch, denom=None) -> LossOutput:
    """Mean hinge over triples; populates batch.active_mask.

    denom overrides the averaging denominator (default: number of
    triples), which lets callers drop inactive triples without changing
    the scale of anything.
    """
    embeddings = np.asarray(embeddings)
    if len(batch) == 0:
        raise ConfigError("triplet loss over an empty batch is undefined")
    if denom is None:
        denom = len(batch)
    a = embeddings[batch.anchors]
    p = embeddings[batch.positives]
    n = embeddings[batch.negatives]
    dap = np.sqrt(((a - p) ** 2).sum(axis=1))
    dan = np.sqrt(((a - n) ** 2).sum(axis=1))
    viol = dap - dan + np.asarray(batch.margin, dtype=embeddings.dtype)
    active = viol > 0
    batch.active_mask = active
    value = float(viol[active].sum() / denom)

    grads = np.zeros_like(embeddings)
    if active.any():
        idx = np.flatnonzero(active)
        # unit difference directions; zero subgradient where a distance vanishes
        gap = np.zeros_like(a[idx])
        gan = np.zeros_like(a[idx])
        np.divide(a[idx] - p[idx], dap[idx, None], out=gap, where=dap[idx, None] > NORM_EPS)
        np.divide(a[idx] - n[idx], dan[idx, None], out=gan, where=dan[idx, None] > NORM_EPS)
        scale = np.asarray(1.0 / denom, dtype=embeddings.dtype)
        np.add.at(grads, batch.anchors[idx], (gap - gan) * scale)
        np.add.at(grads, batch.positives[idx], -gap * scale)
        np.add.at(grads, batch.negatives[idx], gan * scale)
    return LossOutput(value=value, grads=grads, active_count=int(active.sum()))


def triplet_row_grads(embeddings, batch: TripletBatch):
    """Per-triple gradient rows (anchor, positive, negative), unscaled.

    Returns (rows, upstreams) for the active triples only: rows is
    (g, 3) indices and upstreams is (g, 3, d), the gradient of that
    single triple's hinge w.r.t. the three embeddings. Feeds the
    per-triple parameter-gradient norm machinery.
    """
    embeddings = np.asarray(embeddings)
    if batch.active_mask is None:
        raise ValueError("call triplet_loss first to populate active_mask")
    idx = np.flatnonzero(batch.active_mask)
    rows = np.stack([batch.anchors[idx], batch.positives[idx], batch.negatives[idx]], axis=1)
    a = embeddings[rows[:, 0]]
    p = embeddings[rows[:, 1]]
    n = embeddings[rows[:, 2]]
    dap = np.sqrt(((a - p) ** 2).sum(axis=1, keepdims=True))
    dan = np.sqrt(((a - n) ** 2).sum(axis=1, keepdims=True))
    gap = np.zeros_like(a)
    gan = np.zeros_like(a)
    np.divide(a - p, dap, out=gap, where=dap > NORM_EPS)
    np.divide(a - n, dan, out=gan, where=dan > NORM_EPS)
    upstreams = np.stack([gap - gan, -gap, gan], axis=1)
    return rows, upstreams


def active_ratio(batch: TripletBatch) -> float:
    """Fraction of triples whose hinge is strictly violated."""
    if batch.active_mask is None:
        raise ValueError("active_ratio needs a batch evaluated by triplet_loss")
    if len(batch) == 0:
        raise ConfigError("active_ratio over an empty batch is undefined")
    return float(batch.active_mask.sum() / len(batch))


def supcon_infonce_loss(embeddings, labels, temperature=0.07) -> LossOutput:
    """Supervised InfoNCE over in-batch positives.

    Anchors without positives are skipped; if no anchor has one the loss
    is undefined and raises.
    """
    if temperature <= 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    z = np.asarray(embeddings)
    labels = np.asarray(labels)
    b = z.shape[0]
    if b < 2:
        raise ConfigError(f"contrastive loss needs at least 2 embeddings, got {b}")
    if labels.shape != (b,):
        raise ConfigError("labels must align with embedding rows")

    logits = (z @ z.T) / np.asarray(temperature, dtype=z.dtype)
    same = labels[:, None] == labels[None, :]
    eye = np.eye(b, dtype=bool)
    pos = same & ~eye
    n_pos = pos.sum(axis=1)
    anchors = n_pos > 0
    if not anchors.any():
        raise ConfigError("no anchor has an in-batch positive")

    neg_inf = np.asarray(-np.inf, dtype=z.dtype)
    masked = np.where(eye, neg_inf, logits)
    rowmax = masked.max(axis=1, keepdims=True)
    expm = np.exp(masked - rowmax)
    denom = expm.sum(axis=1, keepdims=True)
    logp = (masked - rowmax) - np.log(denom)  # log softmax over j != i

    n_anchors = int(anchors.sum())
    value = 0.0
    for i in np.flatnonzero(anchors):
        value -= logp[i, pos[i]].mean()
    value = float(value / n_anchors)

    # dL/dlogits: softmax minus the positive target, per anchor row
    softmax = expm / denom
    target = np.zeros_like(softmax)
    target[anchors] = pos[anchors] / n_pos[anchors, None]
    glogits = np.zeros_like(softmax)
    glogits[anchors] = (softmax[anchors] - target[anchors]) / n_anchors
    glogits /= temperature
    grads = glogits @ z + glogits.T @ z
    return LossOutput(value=value, grads=grads, active_count=n_anchors)
