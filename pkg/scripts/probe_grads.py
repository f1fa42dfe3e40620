"""Dev probe: finite-difference checks of both models' loss gradients."""
import numpy as np

from fptnn.benchmarks import get_benchmark
from fptnn.geometry import Domain
from fptnn.trbfn import TrbfnModel, RbfKind
from fptnn.tffn import TffnModel
from fptnn.training import residual_loss_and_grad, loss
from fptnn.util import make_rng

bench = get_benchmark("ring2d")
prob = bench.problem()
domain = Domain(np.array([0.1, -0.2]), np.array([2.0, 2.2]))
rng = make_rng(7, "probe")


def fd_grad(fn, vec, h=1e-6):
    g = np.zeros_like(vec)
    for i in range(len(vec)):
        vp = vec.copy(); vp[i] += h
        vm = vec.copy(); vm[i] -= h
        g[i] = (fn(vp) - fn(vm)) / (2 * h)
    return g


def check(model, name):
    batch = domain.lo + rng.random((12, domain.d)) * (domain.hi - domain.lo)
    _, grad = residual_loss_and_grad(model, prob, batch)

    def f(vec):
        model.set_raw_vector(vec)
        val, _ = residual_loss_and_grad(model, prob, batch, want_grad=False)
        return val

    vec0 = model.get_raw_vector()
    num = fd_grad(f, vec0.astype(np.float64))
    model.set_raw_vector(vec0)
    denom = np.maximum(np.abs(num), 1e-8)
    rel = np.abs(grad - num) / denom
    print(f"{name}: max rel err {rel.max():.3e}  (|grad| max {np.abs(grad).max():.3g})")
    worst = np.argsort(rel)[-3:]
    print("  worst idx:", worst, "analytic", grad[worst], "numeric", num[worst])


# TRBFN double, mixed kinds, kink-safe batch (gaussian only first for sanity)
m1 = TrbfnModel.initialize(domain, rank=3, kinds=[RbfKind.GAUSSIAN] * 2, rng=rng, dtype=np.float64)
check(m1, "trbfn gaussian")

m2 = TrbfnModel.initialize(
    domain, rank=3,
    kinds=[RbfKind.WENDLAND, RbfKind.INVERSE_MULTIQUADRIC, RbfKind.GAUSSIAN],
    rng=rng, dtype=np.float64,
)
check(m2, "trbfn mixed")

m3 = TffnModel.initialize(domain, rank=2, widths=(1, 8, 8, 1), rng=rng, dtype=np.float64)
check(m3, "tffn")

# spatial derivative check
x0 = np.array([0.31, -0.47])
for model, name in ((m2, "trbfn"), (m3, "tffn")):
    p, g, hess = model.model_eval_derivs(x0)
    h = 1e-5
    def val(pt):
        return model.eval_point(pt)
    for a in range(2):
        e = np.zeros(2); e[a] = h
        gnum = (val(x0 + e) - val(x0 - e)) / (2 * h)
        print(f"{name} grad[{a}]: {g[a]:.8g} vs fd {gnum:.8g}")
    e0 = np.array([h, 0.0]); e1 = np.array([0.0, h])
    h00 = (val(x0 + e0) - 2 * p + val(x0 - e0)) / h**2
    h01 = (val(x0 + e0 + e1) - val(x0 + e0 - e1) - val(x0 - e0 + e1) + val(x0 - e0 - e1)) / (4 * h**2)
    print(f"{name} hess00 {hess[0,0]:.8g} vs {h00:.8g}; hess01 {hess[0,1]:.8g} vs {h01:.8g}")
