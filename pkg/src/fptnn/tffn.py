"""Tensor feed-forward network with exact second-order jet propagation.

Each one-dimensional factor is a small MLP (tanh hidden layers, softplus
output).  Values and first/second derivatives with respect to the scalar
input are propagated layer by layer as jets (v, v', v''), and parameter
gradients are obtained by reverse accumulation over the same graph with
hand-written adjoints, so the residual loss and its exact gradient never
touch an autodiff framework.

The model is multiplied by a tensor-product cubic envelope that vanishes on
the domain boundary, and normalized by composite Gauss-Legendre quadrature;
because the envelope factorizes across dimensions, the normalization
constant still splits into per-dimension one-dimensional integrals.

All rank * dimension factor networks are evaluated in one stack: layer
tensors are (rank * d, width, channels, points) with the jet channels on
axis 2, so each affine map is a single batched matmul.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from . import tensorops
from .errors import DegenerateModelError
from .quadrature import panel_points
from .util import make_rng


def envelope_1d(center, r, x):
    """Cubic bump factor and its first two derivatives on one coordinate."""
    u = (np.asarray(x, dtype=float) - center) / r
    t = np.maximum(1.0 - u * u, 0.0)
    t2 = t * t
    e = t2 * t
    e1 = -6.0 * u * t2 / r
    e2 = 6.0 * t * (4.0 * u * u - t) / (r * r)
    return e, e1, e2


def envelope(domain, x):
    """Tensor-product envelope value, gradient and Hessian at one point.

    Identically zero, with zero derivatives, outside the domain box.
    """
    x = np.asarray(x, dtype=float)
    d = domain.d
    F = np.empty((d, 1, 1))
    F1 = np.empty_like(F)
    F2 = np.empty_like(F)
    for j in range(d):
        e, e1, e2 = envelope_1d(domain.center[j], domain.r[j], x[j])
        F[j, 0, 0], F1[j, 0, 0], F2[j, 0, 0] = e, e1, e2
    val, grad, hess = tensorops.value_grad_hess(F, F1, F2, np.ones(1))
    return float(val[0]), grad[0], hess[0]


def _softplus(a):
    return np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a)))


@dataclass
class _LayerCache:
    # (rank * d, width, channels, points); jet channels (v, v', v'') on axis 2
    inp: np.ndarray
    a: np.ndarray
    out_v: np.ndarray  # activated value channel, (rank * d, width, points)
    p1: np.ndarray  # first activation derivative (sigma for the softplus layer)


@dataclass
class _ForwardCtx:
    x: np.ndarray
    F: np.ndarray  # effective (MLP * envelope) factor jets, (d, P, N)
    F1: np.ndarray
    F2: np.ndarray
    layers: list
    env: tuple  # (e, e1, e2), each (d, P)
    k: tuple  # raw MLP jets, each (N, d, P)
    products: tensorops.ProductCtx


@dataclass
class _Normalization:
    version: int
    z: float
    factor_integrals: np.ndarray  # (N, d)
    quad_layers: list  # value-pass layer caches at the quadrature nodes


class TffnModel:
    """Rank-N tensor feed-forward network on a fixed domain.

    ``widths`` includes the scalar input and output, e.g. (1, 8, 8, 1).
    Rank weights are fixed at one; all capacity lives in the factors.
    """

    def __init__(self, domain, widths, weights, biases, quad_panels=16, quad_points=16):
        self.domain = domain
        self.widths = tuple(int(w) for w in widths)
        if self.widths[0] != 1 or self.widths[-1] != 1:
            raise ValueError("factor networks map scalars to scalars; widths must start/end at 1")
        self.weights = [np.asarray(w) for w in weights]
        self.biases = [np.asarray(b) for b in biases]
        self.quad_panels = int(quad_panels)
        self.quad_points = int(quad_points)
        self._version = 0
        self._norm: Optional[_Normalization] = None
        self._quad_grid = None

    @classmethod
    def initialize(cls, domain, rank, widths, rng=None, seed=0, dtype=np.float64,
                   quad_panels=16, quad_points=16):
        """Xavier/Glorot-uniform weights, zero biases."""
        if rng is None:
            rng = make_rng(seed, "tffn-init")
        widths = tuple(int(w) for w in widths)
        d = domain.d
        weights, biases = [], []
        for w_in, w_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / (w_in + w_out))
            weights.append(rng.uniform(-limit, limit, size=(rank, d, w_out, w_in)).astype(dtype))
            biases.append(np.zeros((rank, d, w_out), dtype=dtype))
        return cls(domain, widths, weights, biases, quad_panels, quad_points)

    # -- basic properties ---------------------------------------------------

    @property
    def rank(self):
        return self.weights[0].shape[0]

    @property
    def d(self):
        return self.domain.d

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def describe(self):
        arch = " ".join(str(w) for w in self.widths)
        return f"tffn({self.rank},[{arch}])"

    def rank_weights(self):
        return np.ones(self.rank, dtype=self.dtype)

    def get_raw_vector(self):
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_raw_vector(self, vec):
        vec = np.asarray(vec, dtype=self.dtype)
        if vec.size != self.n_params:
            raise ValueError(f"expected {self.n_params} raw parameters, got {vec.size}")
        pos = 0
        for li in range(self.n_layers):
            w, b = self.weights[li], self.biases[li]
            self.weights[li] = vec[pos : pos + w.size].reshape(w.shape).copy()
            pos += w.size
            self.biases[li] = vec[pos : pos + b.size].reshape(b.shape).copy()
            pos += b.size
        self._version += 1
        self._norm = None

    def param_group_slices(self):
        return {"all": slice(0, self.n_params)}

    # -- forward -------------------------------------------------------------

    def _mlp_forward(self, x_cols, order=2):
        """Jet (or value-only) pass of every factor at per-dimension points.

        ``x_cols`` is (d, P); dimension j's factors are evaluated at row j.
        Returns (caches, k, k1, k2) with the outputs shaped (N, d, P).
        """
        d, p = x_cols.shape
        n = self.rank
        nd = n * d
        channels = 1 if order == 0 else 3
        z = np.zeros((n, d, 1, channels, p), dtype=self.dtype)
        z[:, :, 0, 0, :] = x_cols[None]
        if order:
            z[:, :, 0, 1, :] = 1.0
        z = z.reshape(nd, 1, channels, p)
        caches = []
        for li in range(self.n_layers):
            w = self.weights[li].reshape(nd, *self.weights[li].shape[2:])
            b = self.biases[li].reshape(nd, -1)
            w_in = z.shape[1]
            w_out = w.shape[1]
            a = np.matmul(w, z.reshape(nd, w_in, channels * p))
            a = a.reshape(nd, w_out, channels, p)
            a[:, :, 0, :] += b[:, :, None]
            out = np.empty_like(a)
            av = a[:, :, 0]
            out_v = out[:, :, 0]
            if li == self.n_layers - 1:
                # softplus written as max(a, 0) + log1p(exp(-|a|)) for stability
                np.maximum(av, 0.0, out=out_v)
                tmp = np.abs(av)
                np.negative(tmp, out=tmp)
                np.exp(tmp, out=tmp)
                np.log1p(tmp, out=tmp)
                out_v += tmp
                p1 = expit(av)
            else:
                np.tanh(av, out=out_v)
                p1 = np.multiply(out_v, out_v)
                np.subtract(1.0, p1, out=p1)
            if order:
                a1 = a[:, :, 1]
                np.multiply(p1, a1, out=out[:, :, 1])
                if li == self.n_layers - 1:
                    # p2 a1^2 = sigma (1 - sigma) a1^2
                    tmp = np.subtract(1.0, p1)
                    tmp *= out[:, :, 1]
                    tmp *= a1
                else:
                    # p2 a1^2 = -2 tanh p1 a1^2
                    tmp = np.multiply(out_v, out[:, :, 1])
                    tmp *= a1
                    tmp *= -2.0
                np.multiply(p1, a[:, :, 2], out=out[:, :, 2])
                out[:, :, 2] += tmp
            caches.append(_LayerCache(z, a, out_v, p1))
            z = out
        z = z.reshape(n, d, 1, channels, p)
        k = z[:, :, 0, 0, :]
        k1 = z[:, :, 0, 1, :] if order else None
        k2 = z[:, :, 0, 2, :] if order else None
        return caches, k, k1, k2

    def factor_forward(self, i, j, x):
        """One factor network's value and first two input derivatives at scalar x."""
        x_cols = np.zeros((self.d, 1), dtype=self.dtype)
        x_cols[j, 0] = x
        _, k, k1, k2 = self._mlp_forward(x_cols, order=2)
        return float(k[i, j, 0]), float(k1[i, j, 0]), float(k2[i, j, 0])

    def _envelopes(self, x_cols):
        e = np.empty_like(x_cols)
        e1 = np.empty_like(x_cols)
        e2 = np.empty_like(x_cols)
        for j in range(self.d):
            e[j], e1[j], e2[j] = envelope_1d(self.domain.center[j], self.domain.r[j], x_cols[j])
        return e, e1, e2

    def factor_jets(self, x, order=2):
        """Effective factor jets (MLP times envelope) on a batch."""
        x = np.asarray(x, dtype=self.dtype)
        x_cols = np.ascontiguousarray(x.T)
        caches, k, k1, k2 = self._mlp_forward(x_cols, order=order)
        e, e1, e2 = self._envelopes(x_cols)
        e = e.astype(self.dtype)
        F = (k * e[None]).transpose(1, 2, 0)
        F = np.ascontiguousarray(F)
        F1 = F2 = None
        if order:
            e1 = e1.astype(self.dtype)
            e2 = e2.astype(self.dtype)
            F1 = np.ascontiguousarray((k1 * e[None] + k * e1[None]).transpose(1, 2, 0))
            F2 = np.ascontiguousarray(
                (k2 * e[None] + 2.0 * k1 * e1[None] + k * e2[None]).transpose(1, 2, 0)
            )
        return _ForwardCtx(
            x=x, F=F, F1=F1, F2=F2, layers=caches, env=(e, e1, e2), k=(k, k1, k2),
            products=tensorops.product_ctx(F),
        )

    def eval_batch(self, x):
        ctx = self.factor_jets(x, order=0)
        z = self.normalization().z
        return ctx.products.full.sum(axis=1) / z

    def eval_point(self, x):
        return float(self.eval_batch(np.asarray(x, dtype=float)[None, :])[0])

    def model_eval_derivs(self, x):
        """Normalized envelope-multiplied density, gradient and Hessian at a point."""
        x = np.asarray(x, dtype=float)
        ctx = self.factor_jets(x[None, :])
        z = self.normalization().z
        c = self.rank_weights()
        u, grad, hess = tensorops.value_grad_hess(ctx.F, ctx.F1, ctx.F2, c)
        return float(u[0]) / z, grad[0] / z, hess[0] / z

    # -- normalization ---------------------------------------------------------

    def _quad_grids(self):
        """Fixed per-dimension quadrature nodes and envelope-weighted weights."""
        if self._quad_grid is None:
            pts = []
            wts = []
            for j in range(self.d):
                pj, wj = panel_points(
                    self.domain.lo[j], self.domain.hi[j], self.quad_panels, self.quad_points
                )
                e, _, _ = envelope_1d(self.domain.center[j], self.domain.r[j], pj)
                pts.append(pj)
                wts.append(wj * e)
            self._quad_grid = (
                np.asarray(pts, dtype=self.dtype),
                np.asarray(wts, dtype=self.dtype),
            )
        return self._quad_grid

    def normalization(self):
        """Quadrature Z, per-factor integrals of factor * envelope, cached per version."""
        if self._norm is not None and self._norm.version == self._version:
            return self._norm
        pts, w_env = self._quad_grids()
        caches, k, _, _ = self._mlp_forward(pts, order=0)
        factor = np.einsum("ndp,dp->nd", k, w_env)
        z = float(np.prod(factor, axis=1).sum())
        if not z > 0.0 or not np.isfinite(z):
            raise DegenerateModelError(f"normalization constant is {z}")
        self._norm = _Normalization(
            version=self._version, z=z, factor_integrals=factor, quad_layers=caches
        )
        return self._norm

    def integral_over_box(self, lo, hi):
        """Quadrature integral of the normalized density over a box clipped to the domain."""
        lo = np.maximum(np.asarray(lo, dtype=float), self.domain.lo)
        hi = np.minimum(np.asarray(hi, dtype=float), self.domain.hi)
        if np.any(hi <= lo):
            return 0.0
        pts = []
        wts = []
        for j in range(self.d):
            pj, wj = panel_points(lo[j], hi[j], self.quad_panels, self.quad_points)
            e, _, _ = envelope_1d(self.domain.center[j], self.domain.r[j], pj)
            pts.append(pj)
            wts.append(wj * e)
        pts = np.asarray(pts, dtype=self.dtype)
        wts = np.asarray(wts, dtype=self.dtype)
        _, k, _, _ = self._mlp_forward(pts, order=0)
        factor = np.einsum("ndp,dp->nd", k, wts)
        return float(np.prod(factor, axis=1).sum() / self.normalization().z)

    # -- reverse accumulation ----------------------------------------------------

    def _mlp_backward(self, caches, bar_k, bar_k1=None, bar_k2=None):
        """Adjoints of the full factor stack; bar_* arrive as (N, d, P).

        Returns per-layer weight/bias gradients shaped like the parameters.
        """
        n, d, p = bar_k.shape
        nd = n * d
        jets = bar_k1 is not None
        channels = 3 if jets else 1
        bar = np.empty((n, d, 1, channels, p), dtype=self.dtype)
        bar[:, :, 0, 0, :] = bar_k
        if jets:
            bar[:, :, 0, 1, :] = bar_k1
            bar[:, :, 0, 2, :] = bar_k2
        bar = bar.reshape(nd, 1, channels, p)
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        for li in range(self.n_layers - 1, -1, -1):
            cache = caches[li]
            w = self.weights[li]
            w_flat = w.reshape(nd, *w.shape[2:])
            is_out = li == self.n_layers - 1
            p1 = cache.p1
            bar_a = np.empty_like(bar)
            if jets:
                if is_out:
                    p2 = np.subtract(1.0, p1)
                    p2 *= p1
                    p3 = np.multiply(p1, -2.0)
                    p3 += 1.0
                    p3 *= p2
                else:
                    t = cache.out_v
                    p2 = np.multiply(t, p1)
                    p2 *= -2.0
                    p3 = np.multiply(t, t)
                    p3 *= 6.0
                    p3 -= 2.0
                    p3 *= p1
                a1 = cache.a[:, :, 1]
                a2 = cache.a[:, :, 2]
                p2a1 = np.multiply(p2, a1)
                b0 = np.multiply(bar[:, :, 0], p1, out=bar_a[:, :, 0])
                p3 *= a1  # p3 a1
                p3 *= a1  # p3 a1^2
                p2 *= a2  # p2 a2
                p3 += p2  # p3 a1^2 + p2 a2
                p3 *= bar[:, :, 2]
                b0 += p3
                tmp = np.multiply(bar[:, :, 1], p2a1)
                b0 += tmp
                b1 = np.multiply(bar[:, :, 1], p1, out=bar_a[:, :, 1])
                p2a1 *= 2.0
                p2a1 *= bar[:, :, 2]
                b1 += p2a1
                np.multiply(bar[:, :, 2], p1, out=bar_a[:, :, 2])
            else:
                np.multiply(bar[:, :, 0], p1, out=bar_a[:, :, 0])
            w_in = cache.inp.shape[1]
            w_out = bar_a.shape[1]
            gw = np.matmul(
                bar_a.reshape(nd, w_out, channels * p),
                cache.inp.reshape(nd, w_in, channels * p).swapaxes(1, 2),
            )
            grads_w[li] = gw.reshape(w.shape)
            grads_b[li] = bar_a[:, :, 0].sum(axis=-1).reshape(self.biases[li].shape)
            if li > 0:
                bar = np.matmul(
                    w_flat.swapaxes(1, 2), bar_a.reshape(nd, w_out, channels * p)
                ).reshape(nd, w_in, channels, p)
        return grads_w, grads_b

    def _pack(self, grads_w, grads_b):
        parts = []
        for gw, gb in zip(grads_w, grads_b):
            parts.append(gw.ravel())
            parts.append(gb.ravel())
        return np.concatenate(parts)

    def pullback_batch(self, ctx, barF, barF1, barF2):
        """Pull effective-factor jet adjoints back to all weights and biases."""
        e, e1, e2 = ctx.env
        bF = barF.transpose(2, 0, 1)  # (N, d, P)
        bF1 = barF1.transpose(2, 0, 1)
        bF2 = barF2.transpose(2, 0, 1)
        bar_k = bF * e[None] + bF1 * e1[None] + bF2 * e2[None]
        bar_k1 = bF1 * e[None] + 2.0 * bF2 * e1[None]
        bar_k2 = bF2 * e[None]
        grads_w, grads_b = self._mlp_backward(ctx.layers, bar_k, bar_k1, bar_k2)
        return self._pack(grads_w, grads_b)

    def pullback_rank_weights(self, bar_c):
        # rank weights are fixed at one and not trainable
        return np.zeros(self.n_params, dtype=self.dtype)

    def z_gradient(self):
        """Exact gradient of the quadrature Z: linearity lets the fixed nodes act
        as one extra weighted batch through the same reverse pass."""
        norm = self.normalization()
        loo = tensorops.leave_one_out_rows(norm.factor_integrals)  # (N, d)
        _, w_env = self._quad_grids()
        bar_k = loo[:, :, None] * w_env[None]
        grads_w, grads_b = self._mlp_backward(norm.quad_layers, bar_k)
        return self._pack(grads_w, grads_b)

    def param_gradients(self, x, w_value, w_grad, w_hess, w_z=0.0):
        """Exact gradient of a weighted contraction of (p, grad p, hess p, Z)."""
        return tensorops.weighted_contraction_gradient(self, x, w_value, w_grad, w_hess, w_z)
