"""Steady-state Fokker-Planck problems and the expanded differential operator.

A problem bundles the drift ``f``, its divergence, the diffusion matrix ``D``
and the D-derivatives that appear when the operator

    L p = -sum_i d_i(f_i p) + (1/2) sum_ij d_i d_j (D_ij p)

is expanded to act on (p, grad p, hess p) directly:

    L p = A0 * p + A1 . grad p + A2 : hess p

with A0 = -div f + (1/2) sum_ij d_i d_j D_ij,
     A1_a = -f_a + sum_i d_i D_ia,
     A2 = D / 2.

All callables are vectorized: they accept a point of shape (d,) or a batch
(..., d) and broadcast over leading axes.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Problem:
    """A steady-state Fokker-Planck problem in expanded-operator form.

    ``dD`` returns the array dD[..., i, j, k] = d_k D_ij and ``d2D`` returns
    d2D[..., i, j] = d_i d_j D_ij; both may be None when D is constant.
    ``H`` is the potential of the Gibbs construction when one exists.
    """

    d: int
    f: Callable
    div_f: Callable
    D: Callable
    dD: Optional[Callable] = None
    d2D: Optional[Callable] = None
    H: Optional[Callable] = None


def operator_coefficients(problem, x):
    """Coefficients (A0, A1, A2) of the expanded operator at ``x``.

    Shapes are (...,), (..., d) and (..., d, d) for a batch (..., d).
    """
    x = np.asarray(x, dtype=float)
    A0 = -np.asarray(problem.div_f(x), dtype=float)
    A1 = -np.asarray(problem.f(x), dtype=float)
    A2 = 0.5 * np.asarray(problem.D(x), dtype=float)
    if problem.dD is not None:
        dD = np.asarray(problem.dD(x), dtype=float)
        A1 = A1 + np.einsum("...iji->...j", dD)
    if problem.d2D is not None:
        A0 = A0 + 0.5 * np.asarray(problem.d2D(x), dtype=float).sum(axis=(-2, -1))
    return A0, A1, A2


def residual(problem, x, p, grad_p, hess_p):
    """Apply the expanded operator to a candidate density at one point."""
    grad_p = np.asarray(grad_p, dtype=float)
    hess_p = np.asarray(hess_p, dtype=float)
    if grad_p.shape != (problem.d,):
        raise ValueError(f"gradient must have shape ({problem.d},), got {grad_p.shape}")
    if hess_p.shape != (problem.d, problem.d):
        raise ValueError(
            f"hessian must have shape ({problem.d}, {problem.d}), got {hess_p.shape}"
        )
    A0, A1, A2 = operator_coefficients(problem, x)
    return float(A0 * p + A1 @ grad_p + np.sum(A2 * hess_p))


def make_gibbs_problem(H, grad_H, hess_H, D, dD, d2D, d):
    """Build a problem whose stationary density is exp(-H) / Z.

    The drift is f = -(1/2) D grad H + g with g_i = sum_j d_j (D_ij / 2),
    which makes the Gibbs density an exact steady state.  ``div f`` is
    assembled from the supplied derivative callables by the product rule;
    the Hessian of H is required for the D grad H divergence.  Pass
    dD = d2D = None for constant diffusion.
    """
    probe = np.zeros(d)
    try:
        gh = np.asarray(grad_H(probe), dtype=float)
        hh = np.asarray(hess_H(probe), dtype=float)
        Dm = np.asarray(D(probe), dtype=float)
    except Exception as exc:  # pragma: no cover - defensive
        raise ConfigError(f"benchmark callables failed at the origin: {exc}") from exc
    if gh.shape != (d,) or hh.shape != (d, d) or Dm.shape != (d, d):
        raise ConfigError(
            "dimension mismatch between callables: "
            f"grad_H {gh.shape}, hess_H {hh.shape}, D {Dm.shape}, expected d={d}"
        )
    if dD is not None and np.asarray(dD(probe), dtype=float).shape != (d, d, d):
        raise ConfigError("dD must return a (d, d, d) array of d_k D_ij")

    def f(x):
        x = np.asarray(x, dtype=float)
        gH = np.asarray(grad_H(x), dtype=float)
        Dx = np.asarray(D(x), dtype=float)
        drift = -0.5 * np.einsum("...ij,...j->...i", Dx, gH)
        if dD is not None:
            dDx = np.asarray(dD(x), dtype=float)
            drift = drift + 0.5 * np.einsum("...ijj->...i", dDx)
        return drift

    def div_f(x):
        x = np.asarray(x, dtype=float)
        gH = np.asarray(grad_H(x), dtype=float)
        hH = np.asarray(hess_H(x), dtype=float)
        Dx = np.asarray(D(x), dtype=float)
        out = -0.5 * np.einsum("...ij,...ij->...", Dx, hH)
        if dD is not None:
            dDx = np.asarray(dD(x), dtype=float)
            out = out - 0.5 * np.einsum("...iji,...j->...", dDx, gH)
        if d2D is not None:
            out = out + 0.5 * np.asarray(d2D(x), dtype=float).sum(axis=(-2, -1))
        return out

    return Problem(d=d, f=f, div_f=div_f, D=D, dD=dD, d2D=d2D, H=H)
