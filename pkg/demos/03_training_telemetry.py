"""
Training telemetry and the self-limiting active ratio
=====================================================

A run logs, per optimizer step: loss, the active-triple ratio rho, the
largest per-triple gradient norm, the applied update norm, and the cosine
learning rate. On clustered data the hinge deactivates as classes separate,
so rho decays over the run; that decay is what later turns into a drift
bound.
"""

import numpy as np

from ega.adapters import AdapterConfig
from ega.data import gen_synthetic
from ega.training import TrainConfig, train

es = gen_synthetic(d=64, n_classes=10, n_per_class=200, sigma=0.15, seed=42)
tc = TrainConfig(loss="triplet", epochs=12, batch_size=256, seed=42)
ac = AdapterConfig(variant="ega", d=64, h=256, seed=42)
res = train(es.vectors, es.labels, tc, ac)

t = res.telemetry
print("epoch  mean rho   mean loss")
for epoch in range(1, 13):
    rows = [i for i, e in enumerate(t.epoch) if e == epoch]
    rho = np.mean([t.rho[i] for i in rows])
    loss = np.mean([t.loss[i] for i in rows])
    print(f"{epoch:5d}  {rho:8.4f}  {loss:10.5f}")

print(f"\nrho integral over the run: {t.rho_integral():.2f} "
      f"(vs {len(t)} steps if every triple stayed active)")
print(f"cosine lr: first {t.lr[0]:.2e}, last {t.lr[-1]:.2e}")
