"""Pilot: desk-scale ring2d TFFN run."""
import sys
import time

import numpy as np

from fptnn.benchmarks import exact_density, full_space_normalizer, get_benchmark
from fptnn.evaluation import relative_error
from fptnn.geometry import Domain
from fptnn.tffn import TffnModel
from fptnn.training import TrainConfig, train
from fptnn.util import make_rng

SEED = int(sys.argv[1]) if len(sys.argv) > 1 else 0
EPOCHS = int(sys.argv[2]) if len(sys.argv) > 2 else 20000

bench = get_benchmark("ring2d")
prob = bench.problem()
domain = Domain(bench.support_center, bench.support_r)
model = TffnModel.initialize(domain, rank=32, widths=(1, 8, 8, 1),
                             rng=make_rng(SEED, "model-init"))
config = TrainConfig(
    epochs=EPOCHS, batch_size=2048, seed=SEED, optimizer="lion",
    lr_start=1e-3, lr_end=8e-6, w1=0.0, w2=0.0, n_threads=2,
)
norm = full_space_normalizer(bench)
t0 = time.time()
result = train(model, prob, domain, config)
elapsed = time.time() - t0

hist = result.history
for frac in (0.1, 0.25, 0.5, 1.0):
    i = min(len(hist) - 1, int(len(hist) * frac) - 1)
    print(f"epoch {int(hist[i,0])}: residual={hist[i,2]:.4g}")

rows = relative_error(
    lambda x: exact_density(bench, x, norm), model.eval_batch,
    [-2, -2], [2, 2], 100000, [1e-2, 5e-2, 1e-1], seed=123,
)
for r in rows:
    print(f"eps={r.threshold}: n={r.count} err={r.rel_error}")
print(f"seed={SEED} epochs={EPOCHS} wall={elapsed/60:.1f} min")
