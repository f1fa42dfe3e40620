"""Dev probe: per-epoch wall time for the desk-scale configs."""
import time

import numpy as np

from fptnn.benchmarks import get_benchmark
from fptnn.geometry import Domain
from fptnn.tffn import TffnModel
from fptnn.training import TrainConfig, train, residual_loss_and_grad, sample_uniform
from fptnn.trbfn import TrbfnModel, RbfKind
from fptnn.util import make_rng
from concurrent.futures import ThreadPoolExecutor

bench = get_benchmark("ring2d")
prob = bench.problem()
domain = Domain(bench.support_center, bench.support_r)

for threads in (1, 4, 8):
    model = TrbfnModel.initialize(domain, rank=200, kinds=[RbfKind.WENDLAND] * 3, seed=1)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    rng = make_rng(0, "speed")
    batch = sample_uniform(domain, 2000, rng)
    residual_loss_and_grad(model, prob, batch, pool=pool)  # warm
    t0 = time.perf_counter()
    n = 20
    for _ in range(n):
        batch = sample_uniform(domain, 2000, rng)
        residual_loss_and_grad(model, prob, batch, pool=pool)
        g1, g2 = model.penalty_gradients()
    dt = (time.perf_counter() - t0) / n
    print(f"TRBFN(200,3) batch2000 threads={threads}: {dt*1e3:.1f} ms/epoch "
          f"-> {dt*20000/60:.1f} min for 2e4 epochs")
    if pool:
        pool.shutdown()

for threads in (1, 4, 8):
    model = TffnModel.initialize(domain, rank=32, widths=(1, 8, 8, 1), seed=1)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    rng = make_rng(0, "speed")
    batch = sample_uniform(domain, 2048, rng)
    residual_loss_and_grad(model, prob, batch, pool=pool)
    t0 = time.perf_counter()
    n = 10
    for _ in range(n):
        batch = sample_uniform(domain, 2048, rng)
        residual_loss_and_grad(model, prob, batch, pool=pool)
    dt = (time.perf_counter() - t0) / n
    print(f"TFFN(32,[1 8 8 1]) batch2048 threads={threads}: {dt*1e3:.1f} ms/epoch "
          f"-> {dt*20000/60:.1f} min for 2e4 epochs")
    if pool:
        pool.shutdown()
