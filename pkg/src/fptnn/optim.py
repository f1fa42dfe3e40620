"""Optimizers (LION, ADAM, SGD), polynomial learning-rate schedule, two-step phases."""

from dataclasses import dataclass

import numpy as np


@dataclass
class LionState:
    """Sign-momentum optimizer state.

    Update: c = beta1 * m + (1 - beta1) * g; theta -= lr * (sign(c) + wd * theta);
    m = beta2 * m + (1 - beta2) * g.  sign(0) is 0.
    """

    momentum: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.99
    weight_decay: float = 0.0


def lion_step(params, grads, state, lr):
    c = state.beta1 * state.momentum + (1.0 - state.beta1) * grads
    update = np.sign(c)
    if state.weight_decay:
        update = update + state.weight_decay * params
    new_params = params - lr * update
    state.momentum = state.beta2 * state.momentum + (1.0 - state.beta2) * grads
    state.step += 1
    return new_params


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params, grads, state, lr):
    """Standard ADAM with bias correction."""
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class SgdState:
    step: int = 0


def sgd_step(params, grads, state, lr):
    state.step += 1
    return params - lr * grads


@dataclass(frozen=True)
class PolySchedule:
    lr_start: float
    lr_end: float
    total_steps: int
    power: float = 1.0


def poly_lr(schedule, t):
    """Polynomial decay from lr_start to lr_end; out-of-range t clamps."""
    t = min(max(t, 0), schedule.total_steps)
    frac = 1.0 - t / schedule.total_steps
    return schedule.lr_end + (schedule.lr_start - schedule.lr_end) * frac**schedule.power


def two_step_schedule(epoch, phase_epochs=100):
    """Group trained at this epoch when alternating: combination first, then base."""
    return "combination" if (epoch // phase_epochs) % 2 == 0 else "base"


_STEP_FUNCTIONS = {
    "lion": lion_step,
    "adam": adam_step,
    "sgd": sgd_step,
}


def make_optimizer(name, params, beta1=None, beta2=None, weight_decay=0.0):
    """(state, step_fn) pair for a parameter vector shaped like ``params``."""
    name = name.lower()
    if name == "lion":
        state = LionState(
            momentum=np.zeros_like(params),
            beta1=0.9 if beta1 is None else beta1,
            beta2=0.99 if beta2 is None else beta2,
            weight_decay=weight_decay,
        )
    elif name == "adam":
        state = AdamState(
            m=np.zeros_like(params),
            v=np.zeros_like(params),
            beta1=0.9 if beta1 is None else beta1,
            beta2=0.999 if beta2 is None else beta2,
        )
    elif name == "sgd":
        state = SgdState()
    else:
        raise ValueError(f"unknown optimizer {name!r}; choose lion, adam or sgd")
    return state, _STEP_FUNCTIONS[name]
