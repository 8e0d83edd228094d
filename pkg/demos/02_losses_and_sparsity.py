"""
Hinge sparsity: inactive triples contribute exactly nothing
===========================================================

The triplet loss only propagates gradient through triples whose margin is
violated. "Nothing" here is bitwise: deleting the inactive triples from a
batch leaves the loss value and every gradient entry identical.
"""

import numpy as np

from ega.losses import TripletBatch, active_ratio, supcon_infonce_loss, triplet_loss

rng = np.random.default_rng(3)
emb = rng.normal(size=(32, 8)).astype(np.float32)

batch = TripletBatch(
    anchors=rng.integers(0, 32, 40),
    positives=rng.integers(0, 32, 40),
    negatives=rng.integers(0, 32, 40),
    margin=0.2,
)
full = triplet_loss(emb, batch)
print(f"loss {full.value:.4f}, active {full.active_count}/40 "
      f"(rho = {active_ratio(batch):.3f})")

keep = batch.active_mask
reduced = TripletBatch(
    anchors=batch.anchors[keep],
    positives=batch.positives[keep],
    negatives=batch.negatives[keep],
    margin=batch.margin,
)
# denom pins the averaging constant to the original batch size
red = triplet_loss(emb, reduced, denom=len(batch))
print(f"after dropping inactive triples: value equal  = {red.value == full.value}")
print(f"                                 grads equal  = {np.array_equal(red.grads, full.grads)}")

# the supervised InfoNCE alternative has no hinge; every positive pair
# contributes, and anchors without any positive are skipped
labels = np.repeat(np.arange(4), 8)
nce = supcon_infonce_loss(emb, labels, temperature=0.07)
print(f"infonce loss {nce.value:.4f}, grad norm {np.linalg.norm(nce.grads):.4f}")
