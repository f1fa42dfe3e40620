"""Discrete residual loss assembly and the training loop.

The loss is the sum of squared operator residuals over a uniform batch,
plus (for TRBFN) weighted constraint and boundary penalties.  Per epoch the
driver samples a fresh batch from a per-epoch stream, evaluates the exact
loss gradient through the model's pullback machinery, and applies one
optimizer step.  Batches are processed in fixed-size chunks whose partial
results are reduced in chunk order, so the numbers are identical for any
worker count; the chunks may be evaluated by a thread pool.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensorops
from .errors import ConfigError, DivergenceError
from .optim import PolySchedule, make_optimizer, poly_lr, two_step_schedule
from .problem import operator_coefficients
from .util import iter_chunks, make_rng

_CHUNK = 256  # fixed reduction granularity, independent of the thread count


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    seed: int = 0
    optimizer: str = "lion"
    lr_start: float = 9e-4
    lr_end: float = 8e-6
    lr_power: float = 1.0
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    weight_decay: float = 0.0
    w1: float = 50000.0
    w2: float = 100.0
    phase_epochs: int = 100  # two-step alternation length
    n_threads: int = 1
    checkpoint_every: int = 0  # 0: no periodic checkpoints
    history_path: Optional[str] = None
    checkpoint_path: Optional[str] = None

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("penalty weights must be nonnegative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("need epochs >= 0 and batch_size >= 1")


@dataclass
class TrainResult:
    model: object
    history: np.ndarray  # rows: epoch, total, residual, constraint, boundary
    final_epoch: int
    optimizer_states: dict = field(default_factory=dict)


def sample_uniform(domain, n, rng):
    """n i.i.d. uniform points on the domain hyperrectangle."""
    u = rng.random((n, domain.d))
    return domain.lo + u * (domain.hi - domain.lo)


def _chunk_loss_grad(model, x, co, z, c, want_grad):
    """Residual loss of one chunk and (optionally) its parameter gradient pieces.

    The Z chain of this chunk's residuals is returned as a scalar adjoint so
    the driver can apply dZ/dpsi once per step instead of once per chunk.
    """
    ctx = model.factor_jets(x)
    tau = tensorops.apply_functional(ctx.products, ctx.F, ctx.F1, ctx.F2, co)
    residuals = np.einsum("pn,n->p", tau, c) / z
    loss = float(residuals @ residuals)
    if not want_grad:
        return loss, None, None, None
    w = (2.0 / z) * residuals
    bar_tau = w[:, None] * c[None, :]
    barF, barF1, barF2 = tensorops.functional_adjoints(
        ctx.products, ctx.F, ctx.F1, ctx.F2, co, bar_tau
    )
    grad = model.pullback_batch(ctx, barF, barF1, barF2)
    bar_c = np.einsum("pn,p->n", tau, w)
    bar_z = -2.0 * loss / z
    return loss, grad, bar_c, bar_z


def _slice_coeffs(co, s):
    return tensorops.OperatorCoeffs(
        a0=co.a0[s],
        a1=co.a1[:, s],
        diag=co.diag[:, s],
        pairs=[(a, b, w[s]) for a, b, w in co.pairs],
    )


def residual_loss_and_grad(model, problem, batch, want_grad=True, pool=None):
    """Sum of squared residuals over the batch and its exact raw-parameter gradient."""
    x = np.asarray(batch, dtype=model.dtype)
    A0, A1, A2 = operator_coefficients(problem, np.asarray(batch, dtype=float))
    co = tensorops.make_coeffs(A0, A1, A2, dtype=model.dtype)
    norm = model.normalization()
    z = model.dtype.type(norm.z)
    c = model.rank_weights()

    slices = list(iter_chunks(x.shape[0], _CHUNK))
    jobs = [(x[s], _slice_coeffs(co, s)) for s in slices]

    def run(job):
        xs, co_s = job
        return _chunk_loss_grad(model, xs, co_s, z, c, want_grad)

    if pool is not None and len(jobs) > 1:
        results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    loss = 0.0
    grad = None
    bar_c = None
    bar_z = 0.0
    for part_loss, part_grad, part_bar_c, part_bar_z in results:
        loss += part_loss
        if want_grad:
            grad = part_grad if grad is None else grad + part_grad
            bar_c = part_bar_c if bar_c is None else bar_c + part_bar_c
            bar_z += part_bar_z
    if want_grad:
        grad = grad + model.pullback_rank_weights(bar_c)
        if bar_z != 0.0:
            grad = grad + model.dtype.type(bar_z) * model.z_gradient()
    return loss, grad


def loss(model, problem, batch, weights=(0.0, 0.0)):
    """Training loss on a batch with per-term breakdown.

    Returns (total, parts) where parts maps 'residual', 'constraint' and
    'boundary' to their contributions.  Models without penalty terms (or a
    test stub exposing only batch_eval_derivs) contribute zero penalties.
    """
    w1, w2 = weights
    if hasattr(model, "factor_jets"):
        residual_term, _ = residual_loss_and_grad(model, problem, batch, want_grad=False)
    else:
        x = np.asarray(batch, dtype=float)
        p, grad_p, hess_p = model.batch_eval_derivs(x)
        A0, A1, A2 = operator_coefficients(problem, x)
        r = A0 * p + np.einsum("pd,pd->p", A1, grad_p) + np.einsum(
            "pde,pde->p", A2, hess_p
        )
        residual_term = float(r @ r)
    if not np.isfinite(residual_term):
        raise DivergenceError("non-finite residual loss on the batch")
    constraint = boundary = 0.0
    if hasattr(model, "penalty_terms"):
        constraint, boundary = model.penalty_terms()
    total = residual_term + w1 * constraint + w2 * boundary
    parts = {"residual": residual_term, "constraint": constraint, "boundary": boundary}
    return total, parts


class _HistoryWriter:
    """Appends one CSV record per epoch; no-op without a path."""

    def __init__(self, path, resume):
        self._fh = open(path, "a" if resume else "w", newline="") if path else None
        if self._fh and not resume:
            self._fh.write("epoch,total,residual,constraint,boundary\n")

    def write(self, epoch, total, residual, constraint, boundary):
        if self._fh:
            self._fh.write(f"{epoch},{total!r},{residual!r},{constraint!r},{boundary!r}\n")

    def close(self):
        if self._fh:
            self._fh.close()


def train(model, problem, domain, config, start_epoch=0, optimizer_states=None,
          checkpoint_saver=None):
    """Run the sample/gradient/step loop for config.epochs total epochs.

    Uses per-epoch derived random streams, so resuming from ``start_epoch``
    with restored optimizer state continues the exact same trajectory.
    ``checkpoint_saver(model, epoch, states)`` is called at the configured
    cadence and at the end.
    """
    groups = model.param_group_slices()
    two_step = config.optimizer == "two_step"
    inner = "lion" if two_step else config.optimizer
    if two_step and "combination" not in groups:
        raise ConfigError(
            "two_step alternates combination and base parameter groups, which "
            f"{type(model).__name__} does not expose"
        )
    if not two_step:
        groups = {"all": slice(0, model.n_params)}

    params = model.get_raw_vector()
    states = {}
    step_fns = {}
    for name, sl in groups.items():
        state, fn = make_optimizer(
            inner, params[sl], beta1=config.beta1, beta2=config.beta2,
            weight_decay=config.weight_decay,
        )
        states[name] = state
        step_fns[name] = fn
    if optimizer_states:
        states.update(optimizer_states)

    total_for_schedule = config.phase_epochs if two_step else max(config.epochs, 1)
    schedule = PolySchedule(config.lr_start, config.lr_end, total_for_schedule, config.lr_power)

    pool = ThreadPoolExecutor(max_workers=config.n_threads) if config.n_threads > 1 else None
    writer = _HistoryWriter(config.history_path, resume=start_epoch > 0)
    history = []
    has_penalties = hasattr(model, "penalty_gradients")
    try:
        for epoch in range(start_epoch, config.epochs):
            rng = make_rng(config.seed, "train-batch", epoch)
            batch = sample_uniform(domain, config.batch_size, rng)
            res_loss, grad = residual_loss_and_grad(model, problem, batch, pool=pool)
            constraint = boundary = 0.0
            if has_penalties:
                g_con, g_bnd = model.penalty_gradients()
                constraint, boundary = model.penalty_terms()
                grad = grad + model.dtype.type(config.w1) * g_con \
                    + model.dtype.type(config.w2) * g_bnd
            total = res_loss + config.w1 * constraint + config.w2 * boundary
            if not np.isfinite(total):
                raise DivergenceError(f"training diverged at epoch {epoch}: loss={total}")

            if two_step:
                active = two_step_schedule(epoch, config.phase_epochs)
                lr = poly_lr(schedule, epoch % config.phase_epochs)
            else:
                active = "all"
                lr = poly_lr(schedule, epoch)
            sl = groups[active]
            params = model.get_raw_vector()
            params[sl] = step_fns[active](params[sl], grad[sl], states[active], lr)
            model.set_raw_vector(params)

            history.append((epoch, total, res_loss, constraint, boundary))
            writer.write(epoch, total, res_loss, constraint, boundary)
            if (
                checkpoint_saver
                and config.checkpoint_every
                and (epoch + 1) % config.checkpoint_every == 0
            ):
                checkpoint_saver(model, epoch + 1, states)
    finally:
        writer.close()
        if pool is not None:
            pool.shutdown()
    if checkpoint_saver:
        checkpoint_saver(model, config.epochs, states)
    return TrainResult(
        model=model,
        history=np.array(history, dtype=float).reshape(-1, 5),
        final_epoch=config.epochs,
        optimizer_states=states,
    )
