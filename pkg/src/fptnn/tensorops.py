"""Rank-one tensor-product assembly shared by both model families.

A tensor network evaluates as a weighted sum of rank products of
one-dimensional factors,

    u(x) = sum_i c_i  prod_j F_ij(x_j),

and every derivative the solver needs replaces one or two factors of a rank
product by factor derivatives.  The routines here work on "factor jets":
arrays F, F1, F2 of shape (d, n_points, rank) holding each factor's value
and first two derivatives along its own coordinate (dimension-major so all
per-dimension slices are contiguous).  Applying a linear second-order
functional with per-point coefficients (A0, A1, A2),

    T_bi = A0_b P_bi + sum_a (A1_ba F1_abi + A2_baa F2_abi) G_abi
           + sum_{a != a'} A2_baa' F1_abi F1_a'bi G_b i (aa'),

where P is the full product, G the leave-one-out products and G_(aa') the
leave-two-out products.  The adjoint pass pushes a weight on T back onto
(F, F1, F2) in O(d) per point using forward/backward recurrences, which is
what lets both model families expose exact parameter gradients without any
automatic differentiation.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class ProductCtx:
    """Prefix/suffix factor products reused across apply and adjoint passes."""

    prefix: np.ndarray  # (d, n, R): prod_{k<j} F_k
    suffix: np.ndarray  # (d, n, R): prod_{k>j} F_k
    loo: np.ndarray  # (d, n, R): prod_{k!=j} F_k
    full: np.ndarray  # (n, R): prod_k F_k


@dataclass
class OperatorCoeffs:
    """Per-point coefficients of a linear second-order functional.

    a0: (n,); a1 and diag: (d, n); pairs: [(a, b, weight (n,))] for the
    dimension pairs whose mixed second-derivative coefficient is not
    identically zero (off-diagonal entries enter doubled, via symmetry).
    """

    a0: np.ndarray
    a1: np.ndarray
    diag: np.ndarray
    pairs: list


def make_coeffs(A0, A1, A2, dtype=None):
    """Package (A0 (n,), A1 (n, d), A2 (n, d, d)) into contraction layout."""
    A0 = np.asarray(A0)
    A1 = np.asarray(A1)
    A2 = np.asarray(A2)
    if dtype is not None:
        A0 = A0.astype(dtype, copy=False)
        A1 = A1.astype(dtype, copy=False)
        A2 = A2.astype(dtype, copy=False)
    d = A1.shape[-1]
    pairs = []
    for a in range(d):
        for b in range(a + 1, d):
            w = A2[:, a, b]
            if np.any(w != 0.0):
                pairs.append((a, b, np.ascontiguousarray(2.0 * w)))
    diag = np.ascontiguousarray(np.diagonal(A2, axis1=-2, axis2=-1).T)
    return OperatorCoeffs(
        a0=np.ascontiguousarray(A0),
        a1=np.ascontiguousarray(A1.T),
        diag=diag,
        pairs=pairs,
    )


def product_ctx(F):
    d, n, R = F.shape
    prefix = np.empty_like(F)
    suffix = np.empty_like(F)
    acc = np.ones((n, R), dtype=F.dtype)
    for j in range(d):
        prefix[j] = acc
        acc = acc * F[j]
    full = acc
    acc = np.ones((n, R), dtype=F.dtype)
    for j in range(d - 1, -1, -1):
        suffix[j] = acc
        acc = acc * F[j]
    return ProductCtx(prefix=prefix, suffix=suffix, loo=prefix * suffix, full=full)


def _leave_out(F, skip):
    """Product of factors over all dimensions not in ``skip``."""
    d, n, R = F.shape
    out = np.ones((n, R), dtype=F.dtype)
    for j in range(d):
        if j not in skip:
            out = out * F[j]
    return out


def apply_functional(ctx, F, F1, F2, co):
    """Per-rank application T[n, R] of the functional with coefficients ``co``."""
    d = F.shape[0]
    T = co.a0[:, None] * ctx.full
    for j in range(d):
        s = co.a1[j][:, None] * F1[j]
        s += co.diag[j][:, None] * F2[j]
        s *= ctx.loo[j]
        T += s
    for a, b, w in co.pairs:
        T += w[:, None] * F1[a] * F1[b] * _leave_out(F, (a, b))
    return T


def functional_adjoints(ctx, F, F1, F2, co, bar_T):
    """Pull a weight on T back to the factor jets.

    Returns (barF, barF1, barF2), each (d, n, R).  The cross term
    sum_{a != j} S_a G_{aj} is accumulated with forward and backward
    recurrences over dimensions so the cost stays O(d) per point.
    """
    d, n, R = F.shape
    S = np.empty_like(F)
    barF1 = np.empty_like(F)
    barF2 = np.empty_like(F)
    for j in range(d):
        np.multiply(co.a1[j][:, None], F1[j], out=S[j])
        S[j] += co.diag[j][:, None] * F2[j]
        np.multiply(bar_T, co.diag[j][:, None], out=barF2[j])
        barF2[j] *= ctx.loo[j]
        np.multiply(bar_T, co.a1[j][:, None], out=barF1[j])
        barF1[j] *= ctx.loo[j]

    barF = np.empty_like(F)
    fwd = np.zeros((n, R), dtype=F.dtype)  # sum_{a<j} S_a prod_{k<j, k!=a} F_k
    for j in range(d):
        np.multiply(fwd, ctx.suffix[j], out=barF[j])
        fwd = fwd * F[j] + S[j] * ctx.prefix[j]
    bwd = np.zeros((n, R), dtype=F.dtype)  # sum_{a>j} S_a prod_{k>j, k!=a} F_k
    for j in range(d - 1, -1, -1):
        barF[j] += bwd * ctx.prefix[j]
        bwd = bwd * F[j] + S[j] * ctx.suffix[j]
        barF[j] += co.a0[:, None] * ctx.loo[j]
        barF[j] *= bar_T

    for a, b, w in co.pairs:
        wbar = w[:, None] * bar_T
        gab = _leave_out(F, (a, b))
        barF1[a] += wbar * F1[b] * gab
        barF1[b] += wbar * F1[a] * gab
        core = wbar * F1[a] * F1[b]
        for c in range(d):
            if c != a and c != b:
                barF[c] += core * _leave_out(F, (a, b, c))
    return barF, barF1, barF2


def value_grad_hess(F, F1, F2, c):
    """Unnormalized tensor value, gradient and Hessian contracted with rank weights.

    Returns (u, grad, hess) with shapes (n,), (n, d), (n, d, d); the Hessian
    is exactly symmetric by construction.
    """
    d, n, R = F.shape
    ctx = product_ctx(F)
    u = ctx.full @ c
    grad = np.empty((n, d), dtype=F.dtype)
    hess = np.empty((n, d, d), dtype=F.dtype)
    for a in range(d):
        grad[:, a] = (F1[a] * ctx.loo[a]) @ c
        hess[:, a, a] = (F2[a] * ctx.loo[a]) @ c
        for b in range(a + 1, d):
            mixed = (F1[a] * F1[b] * _leave_out(F, (a, b))) @ c
            hess[:, a, b] = mixed
            hess[:, b, a] = mixed
    return u, grad, hess


def leave_one_out_rows(I):
    """Leave-one-out products along the last axis of a (R, d) array."""
    R, d = I.shape
    out = np.empty_like(I)
    acc = np.ones(R, dtype=I.dtype)
    for j in range(d):
        out[:, j] = acc
        acc = acc * I[:, j]
    acc = np.ones(R, dtype=I.dtype)
    for j in range(d - 1, -1, -1):
        out[:, j] *= acc
        acc = acc * I[:, j]
    return out


def weighted_contraction_gradient(model, x, w_value, w_grad, w_hess, w_z=0.0):
    """Exact raw-parameter gradient of a weighted contraction of model outputs.

    Differentiates

        sum_b [ w_value_b p(x_b) + w_grad_b . grad p(x_b) + w_hess_b : hess p(x_b) ]
        + w_z * Z

    with respect to the model's raw parameters, including the 1/Z chain
    through the normalized density.  Works for any model exposing the
    factor-jet protocol (factor_jets, rank_weights, normalization,
    pullback_batch, pullback_rank_weights, z_gradient).
    """
    x = np.asarray(x, dtype=model.dtype)
    n = x.shape[0]
    d = x.shape[1]
    w_value = np.broadcast_to(np.asarray(w_value, dtype=model.dtype), (n,))
    w_grad = np.broadcast_to(np.asarray(w_grad, dtype=model.dtype), (n, d))
    w_hess = np.broadcast_to(np.asarray(w_hess, dtype=model.dtype), (n, d, d))
    co = make_coeffs(w_value, w_grad, w_hess, dtype=model.dtype)
    norm = model.normalization()
    z = norm.z
    c = model.rank_weights()
    ctx = model.factor_jets(x)
    tau = apply_functional(ctx.products, ctx.F, ctx.F1, ctx.F2, co)
    total_unnormalized = float(tau @ c if tau.ndim == 1 else np.einsum("pn,n->", tau, c))

    bar_tau = np.broadcast_to(c[None, :] / z, tau.shape).astype(model.dtype)
    barF, barF1, barF2 = functional_adjoints(
        ctx.products, ctx.F, ctx.F1, ctx.F2, co, bar_tau
    )
    grad = model.pullback_batch(ctx, barF, barF1, barF2)
    grad += model.pullback_rank_weights(tau.sum(axis=0) / z)
    bar_z = -total_unnormalized / (z * z) + w_z
    if bar_z != 0.0:
        grad += bar_z * model.z_gradient()
    return grad
