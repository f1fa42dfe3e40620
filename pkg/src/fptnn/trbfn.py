"""Tensor radial-basis-function network with fully analytic calculus.

Each one-dimensional factor is a convex mixture of radial basis functions,

    k_ij(x) = sum_l alpha_ijl  K(|x - s_ijl| / h_ijl),

and every quantity the solver needs -- spatial derivatives, the
normalization constant, and gradients with respect to all parameters --
has a closed form, so no automatic differentiation appears anywhere.

Simplex constraints on the rank weights and mixture weights are kept by a
softmax over unconstrained logits; bandwidths are stored as log-values so
they stay positive.  The shift/bandwidth box constraints and the boundary
condition are enforced through hinge and boundary penalties.
"""

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erf

from . import tensorops
from .errors import DegenerateModelError
from .util import make_rng, softmax, softmax_vjp

_SQRT_PI = float(np.sqrt(np.pi))


class RbfKind(enum.Enum):
    GAUSSIAN = "gaussian"
    INVERSE_MULTIQUADRIC = "inverse_multiquadric"
    WENDLAND = "wendland"


def rbf_jets(kind, u, order=2):
    """Kernel profile and derivatives at u, as a function of the signed argument.

    Profiles are even in u; where the even extension has a kink (the inverse
    multiquadric at 0, the Wendland breakpoints) the odd derivatives use
    sign(u), which puts the value 0 exactly at the kink.  ``order`` selects
    how many derivatives to return (up to 3; the third feeds parameter
    gradients of second-derivative paths).
    """
    if kind is RbfKind.GAUSSIAN:
        e = np.exp(-u * u)
        out = [e]
        if order >= 1:
            out.append(-2.0 * u * e)
        if order >= 2:
            out.append((4.0 * u * u - 2.0) * e)
        if order >= 3:
            out.append(u * (12.0 - 8.0 * u * u) * e)
        return tuple(out)
    if kind is RbfKind.INVERSE_MULTIQUADRIC:
        au = np.abs(u)
        ib = 1.0 / (1.0 + au)
        ib2 = ib * ib
        k0 = ib2 * ib2 * ib
        out = [k0]
        sgn = np.sign(u)
        if order >= 1:
            out.append(-5.0 * sgn * k0 * ib)
        if order >= 2:
            out.append(30.0 * k0 * ib2)
        if order >= 3:
            out.append(-210.0 * sgn * k0 * ib2 * ib)
        return tuple(out)
    if kind is RbfKind.WENDLAND:
        au = np.abs(u)
        t = np.maximum(1.0 - au, 0.0)
        t2 = t * t
        out = [t2 * t * (3.0 * au + 1.0)]
        if order >= 1:
            out.append(-12.0 * u * t2)
        if order >= 2:
            out.append(-12.0 * t * (1.0 - 3.0 * au))
        if order >= 3:
            out.append(np.sign(u) * (48.0 - 72.0 * au) * (au <= 1.0))
        return tuple(out)
    raise ValueError(f"unknown RBF kind: {kind}")


def _rbf_jets_into(kind, u, k0, k1, k2):
    """Fill preallocated arrays with (K, K', K''); minimizes temporaries."""
    if kind is RbfKind.WENDLAND:
        au = np.abs(u)
        t = np.subtract(1.0, au, out=k1)  # k1 as scratch for (1 - |u|) clipped
        np.maximum(t, 0.0, out=t)
        t2 = np.multiply(t, t, out=k2)  # k2 as scratch for t^2
        np.multiply(t2, t, out=k0)
        tmp = np.multiply(au, 3.0)
        tmp += 1.0
        k0 *= tmp
        np.multiply(au, -3.0, out=tmp)
        tmp += 1.0  # 1 - 3|u|
        np.multiply(u, t2, out=au)  # au scratch = u t^2
        np.multiply(t, tmp, out=k2)
        k2 *= -12.0
        np.multiply(au, -12.0, out=k1)
        return
    if kind is RbfKind.GAUSSIAN:
        sq = np.multiply(u, u)
        np.multiply(sq, 4.0, out=k2)
        k2 -= 2.0
        np.negative(sq, out=sq)
        np.exp(sq, out=k0)
        k2 *= k0
        np.multiply(u, k0, out=k1)
        k1 *= -2.0
        return
    if kind is RbfKind.INVERSE_MULTIQUADRIC:
        au = np.abs(u)
        ib = np.add(au, 1.0, out=au)
        np.reciprocal(ib, out=ib)
        ib2 = np.multiply(ib, ib)
        np.multiply(ib2, ib2, out=k0)
        k0 *= ib
        np.multiply(k0, ib, out=k1)
        k1 *= np.sign(u)
        k1 *= -5.0
        np.multiply(k0, ib2, out=k2)
        k2 *= 30.0
        return
    raise ValueError(f"unknown RBF kind: {kind}")


def _rbf_d3_into(kind, u, k0, out):
    """Third derivative only, reusing the stored kernel value where it helps."""
    if kind is RbfKind.WENDLAND:
        au = np.abs(u)
        np.multiply(au, -72.0, out=out)
        out += 48.0
        out *= np.sign(u)
        out *= au <= 1.0
        return
    if kind is RbfKind.GAUSSIAN:
        np.multiply(u, u, out=out)
        out *= -8.0
        out += 12.0
        out *= u
        out *= k0
        return
    if kind is RbfKind.INVERSE_MULTIQUADRIC:
        au = np.abs(u)
        ib = np.add(au, 1.0, out=au)
        np.reciprocal(ib, out=ib)
        np.multiply(ib, ib, out=out)
        out *= ib
        out *= k0
        out *= np.sign(u)
        out *= -210.0
        return
    raise ValueError(f"unknown RBF kind: {kind}")


def rbf_eval(kind, u):
    """(value, first, second derivative) of the kernel at signed argument u."""
    return rbf_jets(kind, np.asarray(u, dtype=float), order=2)


def rbf_primitive(kind, t):
    """Odd primitive P(t) = int_0^t K(|v|) dv of each kernel profile."""
    t = np.asarray(t, dtype=float)
    at = np.abs(t)
    if kind is RbfKind.GAUSSIAN:
        return np.sign(t) * 0.5 * _SQRT_PI * erf(at)
    if kind is RbfKind.INVERSE_MULTIQUADRIC:
        return np.sign(t) * 0.25 * (1.0 - (1.0 + at) ** -4)
    if kind is RbfKind.WENDLAND:
        tc = np.minimum(at, 1.0)
        val = tc * (1.0 + tc * tc * (-2.0 + tc * (2.0 - 0.6 * tc)))
        return np.sign(t) * val
    raise ValueError(f"unknown RBF kind: {kind}")


def analytic_integral_1d(kind, s, h, a, b):
    """Closed-form integral of K(|x - s| / h) over [a, b] for h > 0."""
    s = np.asarray(s, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(h == 0.0):
        raise ValueError("zero bandwidth")
    return h * (rbf_primitive(kind, (b - s) / h) - rbf_primitive(kind, (a - s) / h))


def kernel_breakpoints(kind, s, h):
    """Interior points where the kernel, as a function of x, loses smoothness."""
    if kind is RbfKind.GAUSSIAN:
        return []
    if kind is RbfKind.INVERSE_MULTIQUADRIC:
        return [float(s)]
    if kind is RbfKind.WENDLAND:
        return [float(s - h), float(s), float(s + h)]
    raise ValueError(f"unknown RBF kind: {kind}")


@dataclass
class _Normalization:
    version: int
    z: float
    factor_integrals: np.ndarray  # (N, d)
    basis_integrals: np.ndarray  # (N, d, m), per-basis closed-form integrals
    rank_products: np.ndarray  # (N,), prod_j factor_integrals


@dataclass
class _ForwardCtx:
    """Everything the batch pullback needs from a forward factor pass."""

    x: np.ndarray
    F: np.ndarray  # (d, M, N)
    F1: np.ndarray
    F2: np.ndarray
    u: list  # per-dim (M, m, N)
    kjet: list  # per-dim (4, M, m, N); slot 3 filled lazily by the pullback
    products: tensorops.ProductCtx


class TrbfnModel:
    """Tensor RBF network tied to a fixed domain.

    Raw parameters: rank logits (N,), mixture logits (N, d, m), shifts
    (N, d, m) and log-bandwidths (N, d, m).  The kernel kind of each of the
    m mixture slots is shared across all factors.
    """

    def __init__(self, domain, kinds, raw_c, raw_alpha, shifts, raw_log_h):
        self.domain = domain
        self.kinds = tuple(RbfKind(k) for k in kinds)
        dtype = raw_c.dtype
        self.raw_c = np.asarray(raw_c, dtype=dtype)
        self.raw_alpha = np.asarray(raw_alpha, dtype=dtype)
        self.shifts = np.asarray(shifts, dtype=dtype)
        self.raw_log_h = np.asarray(raw_log_h, dtype=dtype)
        n, d, m = self.raw_alpha.shape
        if len(self.kinds) != m:
            raise ValueError(f"need {m} kernel kinds, got {len(self.kinds)}")
        if d != domain.d:
            raise ValueError(f"parameter arrays are {d}-dimensional, domain is {domain.d}")
        self._version = 0
        self._norm: Optional[_Normalization] = None
        self._kind_slices = _group_kind_slices(self.kinds)

    # -- construction ------------------------------------------------------

    @classmethod
    def initialize(cls, domain, rank, kinds, rng=None, seed=0, dtype=np.float32):
        """Fresh model: shifts ~ N(center, sqrt(r)) clipped into the box,
        bandwidths 0.9 r, uniform mixture and rank weights."""
        if rng is None:
            rng = make_rng(seed, "trbfn-init")
        m = len(kinds)
        d = domain.d
        scale = np.sqrt(domain.r)
        shifts = domain.center[None, :, None] + scale[None, :, None] * rng.standard_normal(
            (rank, d, m)
        )
        margin = (1.0 - 1e-3) * domain.r
        lo = domain.center - margin
        hi = domain.center + margin
        shifts = np.clip(shifts, lo[None, :, None], hi[None, :, None])
        raw_log_h = np.broadcast_to(
            np.log(0.9 * domain.r)[None, :, None], (rank, d, m)
        ).copy()
        return cls(
            domain,
            kinds,
            raw_c=np.zeros(rank, dtype=dtype),
            raw_alpha=np.zeros((rank, d, m), dtype=dtype),
            shifts=shifts.astype(dtype),
            raw_log_h=raw_log_h.astype(dtype),
        )

    # -- basic properties ---------------------------------------------------

    @property
    def rank(self):
        return self.raw_c.shape[0]

    @property
    def d(self):
        return self.raw_alpha.shape[1]

    @property
    def m(self):
        return self.raw_alpha.shape[2]

    @property
    def dtype(self):
        return self.raw_c.dtype

    @property
    def n_params(self):
        return self.raw_c.size + self.raw_alpha.size + self.shifts.size + self.raw_log_h.size

    def describe(self):
        return f"trbfn({self.rank},{self.m})"

    def rank_weights(self):
        return softmax(self.raw_c)

    def mixture_weights(self):
        return softmax(self.raw_alpha, axis=-1)

    def bandwidths(self):
        return np.exp(self.raw_log_h)

    # -- raw parameter vector ------------------------------------------------

    def get_raw_vector(self):
        return np.concatenate(
            [self.raw_c.ravel(), self.raw_alpha.ravel(), self.shifts.ravel(), self.raw_log_h.ravel()]
        )

    def set_raw_vector(self, vec):
        n, d, m = self.rank, self.d, self.m
        vec = np.asarray(vec, dtype=self.dtype)
        if vec.size != self.n_params:
            raise ValueError(f"expected {self.n_params} raw parameters, got {vec.size}")
        sz = n * d * m
        self.raw_c = vec[:n].copy()
        self.raw_alpha = vec[n : n + sz].reshape(n, d, m).copy()
        self.shifts = vec[n + sz : n + 2 * sz].reshape(n, d, m).copy()
        self.raw_log_h = vec[n + 2 * sz :].reshape(n, d, m).copy()
        self._version += 1
        self._norm = None

    def param_group_slices(self):
        """Raw-vector slices of the combination (c, alpha) and base (s, h) groups."""
        n, sz = self.rank, self.rank * self.d * self.m
        return {
            "combination": slice(0, n + sz),
            "base": slice(n + sz, n + 3 * sz),
        }

    # -- normalization -------------------------------------------------------

    def normalization(self):
        """Exact Z and per-factor integrals over the domain, cached per version."""
        if self._norm is not None and self._norm.version == self._version:
            return self._norm
        alpha = self.mixture_weights()
        h = self.bandwidths()
        lo, hi = self.domain.lo, self.domain.hi
        basis = self._basis_integrals(self.shifts, h, lo, hi)
        factor = np.einsum("ndm,ndm->nd", alpha, basis)
        rank_products = np.prod(factor, axis=1)
        c = self.rank_weights()
        z = float(np.einsum("n,n->", c, rank_products))
        if not z > 0.0:
            raise DegenerateModelError(f"normalization constant is {z}; no mass on the domain")
        self._norm = _Normalization(
            version=self._version,
            z=z,
            factor_integrals=factor,
            basis_integrals=basis,
            rank_products=rank_products,
        )
        return self._norm

    def _basis_integrals(self, shifts, h, lo, hi):
        """Closed-form per-basis integrals over [lo_j, hi_j], shape (N, d, m)."""
        out = np.empty_like(shifts)
        for sel, kind in self._kind_slices:
            s_k = shifts[:, :, sel]
            h_k = h[:, :, sel]
            out[:, :, sel] = analytic_integral_1d(
                kind, s_k, h_k, lo[None, :, None], hi[None, :, None]
            )
        return out

    def integral_over_box(self, lo, hi):
        """Integral of the normalized density over a box clipped to the domain."""
        lo = np.maximum(np.asarray(lo, dtype=float), self.domain.lo)
        hi = np.minimum(np.asarray(hi, dtype=float), self.domain.hi)
        if np.any(hi <= lo):
            return 0.0
        norm = self.normalization()
        alpha = self.mixture_weights()
        basis = self._basis_integrals(self.shifts, self.bandwidths(), lo, hi)
        factor = np.einsum("ndm,ndm->nd", alpha, basis)
        return float(np.einsum("n,n->", self.rank_weights(), np.prod(factor, axis=1)) / norm.z)

    # -- evaluation ----------------------------------------------------------

    def factor_jets(self, x, order=2):
        """Factor values and derivatives on a batch, with kernel tensors retained."""
        x = np.asarray(x, dtype=self.dtype)
        mpts, d = x.shape
        n, m = self.rank, self.m
        alpha = self.mixture_weights()
        inv_h = np.exp(-self.raw_log_h)
        F = np.empty((d, mpts, n), dtype=self.dtype)
        F1 = np.empty_like(F) if order >= 1 else None
        F2 = np.empty_like(F) if order >= 2 else None
        us, kjets = [], []
        for j in range(d):
            # per-dim layout (points, basis, rank): rank is the contiguous axis
            s_t = self.shifts[:, j, :].T
            ih_t = np.ascontiguousarray(inv_h[:, j, :].T)
            u = np.subtract(x[:, j, None, None], s_t[None])
            u *= ih_t[None]
            if order == 0:
                k0 = np.empty_like(u)
                for sel, kind in self._kind_slices:
                    k0[:, sel, :] = rbf_jets(kind, u[:, sel, :], order=0)[0]
                np.einsum("pmn,mn->pn", k0, alpha[:, j, :].T, out=F[j])
                us.append(u)
                kjets.append(None)
                continue
            # slot 3 is reserved for the third derivative, filled by the pullback
            kjet = np.empty((4,) + u.shape, dtype=self.dtype)
            if len(self._kind_slices) == 1:
                kind = self._kind_slices[0][1]
                _rbf_jets_into(kind, u, kjet[0], kjet[1], kjet[2])
            else:
                for sel, kind in self._kind_slices:
                    usel = np.ascontiguousarray(u[:, sel, :])
                    part = np.empty((3,) + usel.shape, dtype=self.dtype)
                    _rbf_jets_into(kind, usel, part[0], part[1], part[2])
                    kjet[0:3, :, sel, :] = part
            a_t = alpha[:, j, :].T
            weights = np.stack([a_t, a_t * ih_t, a_t * ih_t * ih_t])
            fj = np.einsum("kpmn,kmn->kpn", kjet[0:3], weights)
            F[j] = fj[0]
            F1[j] = fj[1]
            F2[j] = fj[2]
            us.append(u)
            kjets.append(kjet)
        return _ForwardCtx(
            x=x, F=F, F1=F1, F2=F2, u=us, kjet=kjets,
            products=tensorops.product_ctx(F),
        )

    def factor_eval(self, i, j, x):
        """One factor's mixture value and first two derivatives at scalar x.

        Differentiation is with respect to the coordinate, with the 1/h and
        1/h^2 chain factors included.
        """
        x = np.atleast_1d(np.asarray(x, dtype=self.dtype))
        alpha = self.mixture_weights()[i, j]
        h = self.bandwidths()[i, j]
        u = (x[:, None] - self.shifts[i, j][None, :]) / h[None, :]
        val = np.zeros_like(x)
        d1 = np.zeros_like(x)
        d2 = np.zeros_like(x)
        for sel, kind in self._kind_slices:
            k0, k1, k2 = rbf_jets(kind, u[:, sel], order=2)
            val += k0 @ alpha[sel]
            d1 += k1 @ (alpha[sel] / h[sel])
            d2 += k2 @ (alpha[sel] / h[sel] ** 2)
        if val.size == 1:
            return float(val[0]), float(d1[0]), float(d2[0])
        return val, d1, d2

    def eval_batch(self, x):
        """Normalized density values on a batch of points."""
        ctx = self.factor_jets(x, order=0)
        z = self.normalization().z
        return np.einsum("pn,n->p", ctx.products.full, self.rank_weights()) / z

    def eval_point(self, x):
        return float(self.eval_batch(np.asarray(x, dtype=float)[None, :])[0])

    def model_eval_derivs(self, x):
        """Normalized density, gradient and Hessian at a single point."""
        x = np.asarray(x, dtype=float)
        ctx = self.factor_jets(x[None, :])
        z = self.normalization().z
        c = self.rank_weights()
        u, grad, hess = tensorops.value_grad_hess(ctx.F, ctx.F1, ctx.F2, c)
        return float(u[0]) / z, grad[0] / z, hess[0] / z

    # -- penalties -----------------------------------------------------------

    def penalty_terms(self):
        """Constraint hinge sum and boundary-value sum of the raw factors."""
        h = self.bandwidths()
        center = self.domain.center[None, :, None]
        r = self.domain.r[None, :, None]
        dist = np.abs(self.shifts - center)
        hinge_shift = np.maximum(dist - r, 0.0)
        hinge_band = np.maximum(h - np.abs(r - dist), 0.0)
        constraint = float(hinge_shift.sum() + hinge_band.sum())

        alpha = self.mixture_weights()
        boundary = 0.0
        for edge in (self.domain.lo, self.domain.hi):
            u = (edge[None, :, None] - self.shifts) / h
            k0 = np.empty_like(u)
            for sel, kind in self._kind_slices:
                k0[:, :, sel] = rbf_jets(kind, u[:, :, sel], order=0)[0]
            boundary += float(np.einsum("ndm,ndm->", alpha, k0))
        return constraint, boundary

    def penalty_gradients(self):
        """(constraint, boundary, gradient vector) of w1*constraint + w2*boundary
        pieces, returned separately so the caller applies its own weights."""
        n, d, m = self.rank, self.d, self.m
        alpha = self.mixture_weights()
        h = self.bandwidths()
        center = self.domain.center[None, :, None]
        r = self.domain.r[None, :, None]
        dev = self.shifts - center
        dist = np.abs(dev)
        sign_dev = np.sign(dev)

        # hinge subgradients are zero exactly at the kinks (strict inequality)
        act_shift = (dist - r) > 0.0
        act_band = (h - np.abs(r - dist)) > 0.0
        g_s_con = act_shift * sign_dev + act_band * np.sign(r - dist) * sign_dev
        g_h_con = act_band.astype(h.dtype)

        g_alpha_b = np.zeros_like(alpha)
        g_s_b = np.zeros_like(self.shifts)
        g_h_b = np.zeros_like(h)
        for edge in (self.domain.lo, self.domain.hi):
            u = (edge[None, :, None] - self.shifts) / h
            for sel, kind in self._kind_slices:
                k0, k1 = rbf_jets(kind, u[:, :, sel], order=1)
                g_alpha_b[:, :, sel] += k0
                g_s_b[:, :, sel] += -alpha[:, :, sel] * k1 / h[:, :, sel]
                g_h_b[:, :, sel] += -alpha[:, :, sel] * k1 * u[:, :, sel] / h[:, :, sel]

        def pack(g_alpha, g_s, g_h):
            grad = np.zeros(self.n_params, dtype=self.dtype)
            sz = n * d * m
            grad[n : n + sz] = softmax_vjp(alpha, g_alpha).ravel()
            grad[n + sz : n + 2 * sz] = g_s.ravel()
            grad[n + 2 * sz :] = (g_h * h).ravel()  # chain through h = exp(raw)
            return grad

        grad_constraint = pack(np.zeros_like(alpha), g_s_con.astype(self.dtype), g_h_con)
        grad_boundary = pack(g_alpha_b, g_s_b, g_h_b)
        return grad_constraint, grad_boundary

    # -- parameter gradients ---------------------------------------------------

    def z_gradient(self):
        """Exact gradient of Z with respect to the raw parameter vector."""
        norm = self.normalization()
        c = self.rank_weights()
        alpha = self.mixture_weights()
        h = self.bandwidths()
        lo, hi = self.domain.lo, self.domain.hi

        bar_c = norm.rank_products
        loo = tensorops.leave_one_out_rows(norm.factor_integrals)
        bar_factor = c[:, None] * loo  # (N, d)

        g_alpha = bar_factor[:, :, None] * norm.basis_integrals
        g_s = np.empty_like(self.shifts)
        g_h = np.empty_like(h)
        for sel, kind in self._kind_slices:
            s_k = self.shifts[:, :, sel]
            h_k = h[:, :, sel]
            ua = (lo[None, :, None] - s_k) / h_k
            ub = (hi[None, :, None] - s_k) / h_k
            k0a = rbf_jets(kind, ua, order=0)[0]
            k0b = rbf_jets(kind, ub, order=0)[0]
            g_s[:, :, sel] = k0a - k0b
            g_h[:, :, sel] = norm.basis_integrals[:, :, sel] / h_k - ub * k0b + ua * k0a
        g_s = bar_factor[:, :, None] * alpha * g_s
        g_h = bar_factor[:, :, None] * alpha * g_h

        return self._pack_gradient(bar_c, g_alpha, g_s, g_h)

    def _pack_gradient(self, g_c, g_alpha, g_s, g_h):
        """Chain gradients on (c, alpha, s, h) through the raw parameterization."""
        n, d, m = self.rank, self.d, self.m
        sz = n * d * m
        grad = np.empty(self.n_params, dtype=self.dtype)
        grad[:n] = softmax_vjp(self.rank_weights(), g_c)
        grad[n : n + sz] = softmax_vjp(self.mixture_weights(), g_alpha).ravel()
        grad[n + sz : n + 2 * sz] = g_s.ravel()
        grad[n + 2 * sz :] = (g_h * self.bandwidths()).ravel()
        return grad

    def pullback_batch(self, ctx, barF, barF1, barF2):
        """Pull jet adjoints back to (c-free) factor parameters.

        Returns the gradient on (alpha, s, h) packed into a full raw vector
        (the rank-weight slots are zero; rank-weight adjoints are contracted
        by the caller, which owns the per-rank weights).
        """
        n, d, m = self.rank, self.d, self.m
        alpha = self.mixture_weights()
        inv_h = np.exp(-self.raw_log_h)
        g_alpha = np.empty_like(alpha)
        g_s = np.empty_like(self.shifts)
        g_h = np.empty_like(inv_h)
        for j in range(d):
            u, kjet = ctx.u[j], ctx.kjet[j]
            for sel, kind in self._kind_slices:
                if len(self._kind_slices) == 1:
                    _rbf_d3_into(kind, u, kjet[0], kjet[3])
                else:
                    usel = np.ascontiguousarray(u[:, sel, :])
                    part = np.empty_like(usel)
                    _rbf_d3_into(kind, usel, np.ascontiguousarray(kjet[0][:, sel, :]), part)
                    kjet[3][:, sel, :] = part
            bars = np.stack([barF[j], barF1[j], barF2[j]])
            ih = inv_h[:, j, :].T  # (m, N)
            # one diagonal contraction per adjoint family: value, shift, bandwidth
            e_val = np.einsum("xpmn,xpn->xmn", kjet[0:3], bars)
            e_shift = np.einsum("xpmn,xpn->xmn", kjet[1:4], bars)
            uk = u[None] * kjet[1:4]
            e_band = np.einsum("xpmn,xpn->xmn", uk, bars)
            a_ih = alpha[:, j, :].T * ih
            g_alpha[:, j, :] = (e_val[0] + e_val[1] * ih + e_val[2] * ih * ih).T
            g_s[:, j, :] = (
                -a_ih * (e_shift[0] + e_shift[1] * ih + e_shift[2] * ih * ih)
            ).T
            g_h[:, j, :] = (
                -a_ih * (
                    e_band[0] + (e_band[1] + e_val[1]) * ih
                    + (e_band[2] + 2.0 * e_val[2]) * ih * ih
                )
            ).T
        return self._pack_gradient(np.zeros(n, dtype=self.dtype), g_alpha, g_s, g_h)

    def pullback_rank_weights(self, bar_c):
        grad = np.zeros(self.n_params, dtype=self.dtype)
        grad[: self.rank] = softmax_vjp(self.rank_weights(), bar_c.astype(self.dtype))
        return grad

    def param_gradients(self, x, w_value, w_grad, w_hess, w_z=0.0):
        """Exact raw-parameter gradient of a weighted contraction.

        Differentiates sum_b [w_value_b p(x_b) + w_grad_b . grad p(x_b)
        + w_hess_b : hess p(x_b)] + w_z * Z with respect to every raw
        parameter, including the 1/Z chain inside the normalized density.
        """
        return tensorops.weighted_contraction_gradient(self, x, w_value, w_grad, w_hess, w_z)


def _group_kind_slices(kinds):
    """Group the mixture axis into contiguous index lists per kernel kind."""
    slices = []
    for kind in RbfKind:
        idx = [i for i, k in enumerate(kinds) if k is kind]
        if idx:
            slices.append((idx, kind))
    return slices
