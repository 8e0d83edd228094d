"""Deterministic mini-batch training with bit-reproducible telemetry.

One seed drives three independent streams (parameter init is governed by
the adapter's own seed): epoch shuffling and triplet sampling. Batches
are visited in a fixed order, all gradient reductions are ordered, and
the optimizer is plain AdamW with decoupled weight decay, so a rerun
with the same config writes byte-identical telemetry.

Telemetry rows are logged every optimizer step:

    step, epoch, loss, rho, max_triplet_grad_norm, update_norm, lr

rho is the active-triple fraction (1.0 for the contrastive loss, whose
gradient is dense); max_triplet_grad_norm is the largest per-triple
parameter-gradient norm in the batch (NaN for the contrastive loss).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .adapters import (
    AdapterConfig,
    adapter_backward,
    adapter_forward_cached,
    init_adapter,
)
from .errors import ConfigError
from .losses import TripletBatch, supcon_infonce_loss, triplet_loss, triplet_row_grads
from .adapters import group_grad_sq_norms

log = logging.getLogger(__name__)

TELEMETRY_COLUMNS = ("step", "epoch", "loss", "rho", "max_triplet_grad_norm", "update_norm", "lr")

DEFAULT_LR = {"ega": 1e-4, "lora": 1e-3}


@dataclass
class TrainConfig:
    loss: str = "triplet"  # "triplet" | "infonce"
    epochs: int = 50
    batch_size: int = 256
    lr: float | None = None  # defaults per variant when unset
    lr_min: float = 0.0
    weight_decay: float = 1e-4
    margin: float = 0.2
    temperature: float = 0.07
    seed: int = 42
    snapshot_every: int = 0  # keep a parameter copy every k epochs (0 = off)

    def validate(self):
        if self.loss not in ("triplet", "infonce"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be at least 2, got {self.batch_size}")
        if self.lr is not None and self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.lr_min < 0 or (self.lr is not None and self.lr_min > self.lr):
            raise ConfigError("lr_min must lie in [0, lr]")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be non-negative")
        return self

    def resolved_lr(self, variant):
        return DEFAULT_LR[variant] if self.lr is None else self.lr


def cosine_lr(step, total_steps, lr_max, lr_min=0.0):
    """Cosine decay from lr_max at step 0 toward lr_min at step total_steps."""
    if total_steps <= 0:
        return lr_max
    frac = min(max(step / total_steps, 0.0), 1.0)
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * frac))


@dataclass
class AdamWState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params):
        return cls(
            m=[np.zeros_like(a) for a in params.arrays()],
            v=[np.zeros_like(a) for a in params.arrays()],
        )


def adamw_step(params, grads, state: AdamWState, lr, weight_decay):
    """One decoupled-weight-decay Adam update, in place. Returns ||delta||."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    sq = 0.0
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        mhat = m / bc1
        vhat = v / bc2
        delta = lr * (mhat / (np.sqrt(vhat) + state.eps) + weight_decay * p)
        p -= delta
        sq += float((delta.astype(np.float64) ** 2).sum())
    return math.sqrt(sq)


def sample_triplets(labels, rng, margin) -> TripletBatch:
    """One (positive, negative) draw per eligible anchor, in index order.

    Anchors whose class has no second member are skipped; a single-class
    batch yields an empty TripletBatch.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    anchors, positives, negatives = [], [], []
    for i in range(n):
        same = np.flatnonzero(labels == labels[i])
        same = same[same != i]
        if same.size == 0:
            continue
        diff = np.flatnonzero(labels != labels[i])
        if diff.size == 0:
            continue
        anchors.append(i)
        positives.append(int(same[rng.integers(same.size)]))
        negatives.append(int(diff[rng.integers(diff.size)]))
    return TripletBatch(
        np.array(anchors, dtype=np.int64),
        np.array(positives, dtype=np.int64),
        np.array(negatives, dtype=np.int64),
        margin=margin,
    )


@dataclass
class TrainTelemetry:
    step: list = field(default_factory=list)
    epoch: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    max_triplet_grad_norm: list = field(default_factory=list)
    update_norm: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    # kept in memory for analysis, not part of the CSV contract
    batch_grad_norm: list = field(default_factory=list)

    def log(self, step, epoch, loss, rho, gmax, update_norm, lr, batch_grad_norm):
        self.step.append(int(step))
        self.epoch.append(int(epoch))
        self.loss.append(float(loss))
        self.rho.append(float(rho))
        self.max_triplet_grad_norm.append(float(gmax))
        self.update_norm.append(float(update_norm))
        self.lr.append(float(lr))
        self.batch_grad_norm.append(float(batch_grad_norm))

    def __len__(self):
        return len(self.step)

    def epoch_mean_rho(self, epoch):
        rows = [r for r, e in zip(self.rho, self.epoch) if e == epoch]
        if not rows:
            raise ValueError(f"no telemetry rows for epoch {epoch}")
        return float(np.mean(rows))

    def rho_integral(self, through_epoch=None):
        """Sum of rho over steps (unit step width), optionally truncated."""
        if through_epoch is None:
            return float(np.sum(self.rho))
        return float(sum(r for r, e in zip(self.rho, self.epoch) if e <= through_epoch))

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(TELEMETRY_COLUMNS)
            for i in range(len(self.step)):
                w.writerow(
                    [
                        self.step[i],
                        self.epoch[i],
                        repr(self.loss[i]),
                        repr(self.rho[i]),
                        repr(self.max_triplet_grad_norm[i]),
                        repr(self.update_norm[i]),
                        repr(self.lr[i]),
                    ]
                )

    @classmethod
    def from_csv(cls, path):
        t = cls()
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or tuple(reader.fieldnames) != TELEMETRY_COLUMNS:
                raise ConfigError(f"{path}: unexpected telemetry columns {reader.fieldnames}")
            for row in reader:
                t.log(
                    int(row["step"]),
                    int(row["epoch"]),
                    float(row["loss"]),
                    float(row["rho"]),
                    float(row["max_triplet_grad_norm"]),
                    float(row["update_norm"]),
                    float(row["lr"]),
                    float("nan"),
                )
        return t


@dataclass
class TrainResult:
    params: object
    telemetry: TrainTelemetry
    snapshots: list  # (epoch, params copy); always includes epoch 0 when enabled
    adapter_cfg: AdapterConfig
    train_cfg: TrainConfig


def train(vectors, labels, train_cfg: TrainConfig, adapter_cfg: AdapterConfig) -> TrainResult:
    """Fit an adapter on unit embeddings with integer labels."""
    train_cfg.validate()
    adapter_cfg.validate()
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    labels = np.asarray(labels)
    n = vectors.shape[0]
    if n < 2:
        raise ConfigError("training needs at least 2 samples")
    if np.unique(labels).size < 2:
        raise ConfigError("training needs at least 2 classes")
    norms = np.sqrt((vectors.astype(np.float64) ** 2).sum(axis=1))
    if np.any(np.abs(norms - 1.0) > 1e-4):
        raise ConfigError("training embeddings must be unit vectors")

    params = init_adapter(adapter_cfg)
    state = AdamWState.init(params)
    ss = np.random.SeedSequence(train_cfg.seed)
    shuffle_rng, sample_rng = (np.random.default_rng(s) for s in ss.spawn(2))

    telemetry = TrainTelemetry()
    snapshots = []
    if train_cfg.snapshot_every > 0:
        snapshots.append((0, params.copy()))

    lr_max = train_cfg.resolved_lr(adapter_cfg.variant)
    steps_per_epoch = math.ceil(n / train_cfg.batch_size)
    total_steps = train_cfg.epochs * steps_per_epoch
    schedule_pos = 0
    step = 0

    for epoch in range(1, train_cfg.epochs + 1):
        perm = shuffle_rng.permutation(n)
        for lo in range(0, n, train_cfg.batch_size):
            batch_idx = perm[lo : lo + train_cfg.batch_size]
            lr_t = cosine_lr(schedule_pos, total_steps, lr_max, train_cfg.lr_min)
            schedule_pos += 1
            if batch_idx.size < 2:
                log.warning("epoch %d: skipping undersized batch (%d rows)", epoch, batch_idx.size)
                continue
            zb = vectors[batch_idx]
            yb, cache = adapter_forward_cached(zb, params, adapter_cfg)
            if train_cfg.loss == "triplet":
                tb = sample_triplets(labels[batch_idx], sample_rng, train_cfg.margin)
                if len(tb) == 0:
                    log.warning("epoch %d: single-class batch, step skipped", epoch)
                    continue
                out = triplet_loss(yb, tb)
                rho = out.active_count / len(tb)
                if out.active_count:
                    rows, ups = triplet_row_grads(yb, tb)
                    sq = group_grad_sq_norms(cache, rows, ups, params, adapter_cfg)
                    gmax = math.sqrt(float(sq.max()))
                else:
                    gmax = 0.0
            else:
                out = supcon_infonce_loss(yb, labels[batch_idx], train_cfg.temperature)
                rho = 1.0
                gmax = float("nan")
            grads, _ = adapter_backward(cache, out.grads, params, adapter_cfg)
            bg_sq = sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.arrays())
            upd = adamw_step(params, grads, state, lr_t, train_cfg.weight_decay)
            step += 1
            telemetry.log(step, epoch, out.value, rho, gmax, upd, lr_t, math.sqrt(bg_sq))
        if train_cfg.snapshot_every > 0 and epoch % train_cfg.snapshot_every == 0:
            snapshots.append((epoch, params.copy()))
    if train_cfg.snapshot_every > 0 and snapshots[-1][0] != train_cfg.epochs:
        snapshots.append((train_cfg.epochs, params.copy()))
    return TrainResult(params, telemetry, snapshots, adapter_cfg, train_cfg)
