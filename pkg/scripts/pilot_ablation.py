"""Pilot: boundary-penalty ablation with mixed Wendland + inverse multiquadric."""
import sys
import time

import numpy as np

from fptnn.benchmarks import exact_density, full_space_normalizer, get_benchmark
from fptnn.evaluation import relative_error
from fptnn.geometry import Domain
from fptnn.training import TrainConfig, train
from fptnn.trbfn import RbfKind, TrbfnModel
from fptnn.util import make_rng

EPOCHS = int(sys.argv[1]) if len(sys.argv) > 1 else 4000
SEED = 1

bench = get_benchmark("ring2d")
prob = bench.problem()
domain = Domain(bench.support_center, bench.support_r)
norm = full_space_normalizer(bench)
kinds = [RbfKind.WENDLAND] * 3 + [RbfKind.INVERSE_MULTIQUADRIC] * 3

for w2 in (100.0, 0.0):
    model = TrbfnModel.initialize(domain, rank=64, kinds=kinds,
                                  rng=make_rng(SEED, "model-init"))
    config = TrainConfig(epochs=EPOCHS, batch_size=1000, seed=SEED, optimizer="lion",
                         lr_start=9e-4, lr_end=8e-6, w1=50000.0, w2=w2, n_threads=1)
    t0 = time.time()
    result = train(model, prob, domain, config)
    constraint, boundary = model.penalty_terms()
    rows = relative_error(
        lambda x: exact_density(bench, x, norm), model.eval_batch,
        [-2, -2], [2, 2], 50000, [1e-1], seed=99,
    )
    print(f"w2={w2}: boundary_sum={boundary:.6g} constraint={constraint:.4g} "
          f"err@0.1={rows[0].rel_error:.5f} residual={result.history[-50:,2].mean():.4g} "
          f"wall={(time.time()-t0)/60:.1f}min", flush=True)
