"""Operator assembly, Gibbs construction and the built-in benchmarks."""

import math

import numpy as np
import pytest

from conftest import fd_gradient, fd_hessian
from fptnn.benchmarks import (
    BENCHMARKS,
    BenchmarkDef,
    exact_density,
    exact_normalizer,
    full_space_normalizer,
    get_benchmark,
)
from fptnn.errors import ConfigError
from fptnn.problem import make_gibbs_problem, operator_coefficients, residual
from fptnn.quadrature import panel_points

ALL_NAMES = sorted(BENCHMARKS)


def _support_points(bench, n, rng):
    lo = bench.support_center - bench.support_r
    hi = bench.support_center + bench.support_r
    return lo + rng.random((n, bench.d)) * (hi - lo)


# -- closed-form derivative guards ------------------------------------------


@pytest.mark.parametrize("name", ALL_NAMES)
def test_grad_hess_match_finite_differences(name, rng):
    bench = get_benchmark(name)
    x = _support_points(bench, 40, rng)
    grad = bench.grad_H(x)
    hess = bench.hess_H(x)
    fd_g = fd_gradient(bench.H, x)
    fd_h = fd_hessian(bench.H, x)
    np.testing.assert_allclose(grad, fd_g, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(hess, fd_h, rtol=1e-6, atol=2e-5)


def test_unimode4d_diffusion_derivatives(rng):
    bench = get_benchmark("unimode4d")
    x = _support_points(bench, 30, rng)
    dD = bench.dD(x)
    h = 1e-5
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        fd = (bench.D(x + e) - bench.D(x - e)) / (2 * h)
        np.testing.assert_allclose(dD[..., k], fd, rtol=1e-6, atol=1e-6)
    # d2D[i, j] = d_i d_j D_ij
    d2D = bench.d2D(x)
    for i in range(4):
        for j in range(4):
            ei = np.zeros(4)
            ej = np.zeros(4)
            ei[i] = h
            ej[j] = h
            if i == j:
                fd = (
                    bench.D(x + ei)[..., i, j]
                    - 2 * bench.D(x)[..., i, j]
                    + bench.D(x - ei)[..., i, j]
                ) / h**2
            else:
                fd = (
                    bench.D(x + ei + ej)[..., i, j]
                    - bench.D(x + ei - ej)[..., i, j]
                    - bench.D(x - ei + ej)[..., i, j]
                    + bench.D(x - ei - ej)[..., i, j]
                ) / (4 * h**2)
            np.testing.assert_allclose(d2D[..., i, j], fd, rtol=1e-5, atol=1e-5)


def test_unimode4d_sigma_is_sqrt_of_diffusion(rng):
    bench = get_benchmark("unimode4d")
    x = _support_points(bench, 25, rng)
    s = bench.sigma(x)
    np.testing.assert_allclose(np.einsum("...ik,...jk->...ij", s, s), bench.D(x), rtol=1e-12)


# -- Gibbs drift construction -------------------------------------------------


def test_ring2d_drift_closed_form(rng):
    prob = get_benchmark("ring2d").problem()
    x = rng.uniform(-2, 2, size=(50, 2))
    s = (x**2).sum(axis=1, keepdims=True)
    np.testing.assert_allclose(prob.f(x), -8.0 * x * (s - 1.0), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(prob.f(np.array([1.0, 0.0])), [0.0, 0.0], atol=1e-14)


def test_constant_potential_gives_zero_drift():
    d = 3
    prob = make_gibbs_problem(
        H=lambda x: np.full(np.asarray(x).shape[:-1], 5.0),
        grad_H=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        hess_H=lambda x: np.zeros(np.asarray(x).shape[:-1] + (d, d)),
        D=lambda x: np.broadcast_to(1.7 * np.eye(d), np.asarray(x).shape[:-1] + (d, d)),
        dD=None,
        d2D=None,
        d=d,
    )
    x = np.array([0.3, -1.0, 2.0])
    np.testing.assert_allclose(prob.f(x), np.zeros(d), atol=1e-15)
    assert prob.div_f(x) == 0.0


def test_unimode4d_spurious_drift_term(rng):
    # g_i = sum_j d_j (D_ij / 2) on the state-dependent block
    bench = get_benchmark("unimode4d")
    prob = bench.problem()
    x = _support_points(bench, 100, rng)
    g = prob.f(x) + 0.5 * np.einsum("...ij,...j->...i", bench.D(x), bench.grad_H(x))
    expected_g3 = 0.2 * x[:, 2] * x[:, 3] ** 2 + 0.2 * x[:, 2] ** 2 * x[:, 3]
    np.testing.assert_allclose(g[:, 2], expected_g3, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(g[:, 3], expected_g3, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(g[:, :2], 0.0, atol=1e-14)


@pytest.mark.parametrize("name", ALL_NAMES)
def test_divergence_matches_finite_differences(name, rng):
    bench = get_benchmark(name)
    prob = bench.problem()
    x = _support_points(bench, 30, rng)
    h = 1e-5
    div_fd = np.zeros(x.shape[0])
    for a in range(bench.d):
        e = np.zeros(bench.d)
        e[a] = h
        div_fd += (prob.f(x + e)[:, a] - prob.f(x - e)[:, a]) / (2 * h)
    np.testing.assert_allclose(prob.div_f(x), div_fd, rtol=1e-6, atol=1e-6)


def test_dimension_mismatch_rejected():
    with pytest.raises(ConfigError):
        make_gibbs_problem(
            H=lambda x: 0.0,
            grad_H=lambda x: np.zeros(3),  # wrong length
            hess_H=lambda x: np.zeros((2, 2)),
            D=lambda x: np.eye(2),
            dD=None,
            d2D=None,
            d=2,
        )


# -- the operator --------------------------------------------------------------


def test_residual_ou_identity():
    # f = -x, D = 2: p = exp(-x^2/2)/sqrt(2 pi) solves the equation exactly
    prob = make_gibbs_problem(
        H=lambda x: 0.5 * np.asarray(x)[..., 0] ** 2,
        grad_H=lambda x: np.asarray(x, dtype=float),
        hess_H=lambda x: np.ones(np.asarray(x).shape[:-1] + (1, 1)),
        D=lambda x: np.broadcast_to(2.0 * np.eye(1), np.asarray(x).shape[:-1] + (1, 1)),
        dD=None,
        d2D=None,
        d=1,
    )
    for xv in np.linspace(-3, 3, 13):
        p = math.exp(-0.5 * xv * xv) / math.sqrt(2 * math.pi)
        grad = np.array([-xv * p])
        hess = np.array([[(xv * xv - 1.0) * p]])
        assert abs(residual(prob, np.array([xv]), p, grad, hess)) < 1e-12


def test_residual_zero_inputs():
    prob = get_benchmark("ring2d").problem()
    assert residual(prob, np.array([0.3, 0.4]), 0.0, np.zeros(2), np.zeros((2, 2))) == 0.0


def test_residual_linearity(rng):
    prob = get_benchmark("unimode4d").problem()
    x = rng.uniform(-1, 1, size=4)
    p1, g1, h1 = rng.random(), rng.random(4), rng.random((4, 4))
    h1 = h1 + h1.T
    p2, g2, h2 = rng.random(), rng.random(4), rng.random((4, 4))
    h2 = h2 + h2.T
    a, b = 1.7, -0.3
    lhs = residual(prob, x, a * p1 + b * p2, a * g1 + b * g2, a * h1 + b * h2)
    rhs = a * residual(prob, x, p1, g1, h1) + b * residual(prob, x, p2, g2, h2)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_residual_shape_validation():
    prob = get_benchmark("ring2d").problem()
    with pytest.raises(ValueError):
        residual(prob, np.zeros(2), 1.0, np.zeros(3), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        residual(prob, np.zeros(2), 1.0, np.zeros(2), np.zeros((3, 3)))


@pytest.mark.parametrize("name", ["ring2d", "unimode4d"])
def test_gibbs_density_annihilated(name, rng):
    # reduced-size version of the acceptance property
    bench = get_benchmark(name)
    prob = bench.problem()
    norm = full_space_normalizer(bench)
    x = _support_points(bench, 200, rng)

    def density(pts):
        return np.exp(-bench.H(pts)) / norm

    p = density(x)
    grad = fd_gradient(density, x)
    hess = fd_hessian(density, x)
    A0, A1, A2 = operator_coefficients(prob, x)
    res = A0 * p + np.einsum("nd,nd->n", A1, grad) + np.einsum("nde,nde->n", A2, hess)
    bound = 1e-6 * np.maximum(1.0, p)
    assert np.all(np.abs(res) <= bound)


# -- exact density and normalizer ----------------------------------------------


def test_normalizer_of_flat_potential_is_volume():
    flat = BenchmarkDef(
        name="flat3d",
        d=3,
        groups=((0,), (1, 2)),
        group_H=(
            lambda x: np.zeros(np.asarray(x).shape[:-1]),
            lambda x: np.zeros(np.asarray(x).shape[:-1]),
        ),
        grad_H=None,
        hess_H=None,
        D=None,
        sigma=None,
    )
    lo = np.array([-1.0, 0.0, 2.0])
    hi = np.array([2.0, 1.0, 2.5])
    vol = np.prod(hi - lo)
    assert abs(exact_normalizer(flat, lo, hi) - vol) < 1e-12 * vol


def test_normalizer_separable_gaussian():
    gauss = BenchmarkDef(
        name="gauss4d",
        d=4,
        groups=((0, 1), (2, 3)),
        group_H=(lambda x: 0.5 * (x**2).sum(axis=-1),) * 2,
        grad_H=None,
        hess_H=None,
        D=None,
        sigma=None,
    )
    z = exact_normalizer(gauss, np.full(4, -40.0), np.full(4, 40.0))
    assert abs(z - (2 * math.pi) ** 2) < 1e-10 * (2 * math.pi) ** 2


def test_ring2d_normalizer_against_independent_grid():
    bench = get_benchmark("ring2d")
    lo = bench.support_center - bench.support_r
    hi = bench.support_center + bench.support_r
    z = exact_normalizer(bench, lo, hi)

    def tensor_grid(panels):
        px, wx = panel_points(lo[0], hi[0], panels, 16)
        py, wy = panel_points(lo[1], hi[1], panels, 16)
        gx, gy = np.meshgrid(px, py, indexing="ij")
        vals = np.exp(-bench.H(np.stack([gx.ravel(), gy.ravel()], axis=-1)))
        return float(np.sum(np.outer(wx, wy).ravel() * vals))

    coarse, fine = tensor_grid(24), tensor_grid(48)
    assert abs(coarse - fine) < 1e-10 * abs(fine)  # the oracle itself converged
    assert abs(z - fine) < 1e-10 * abs(fine)


def test_exact_density_ring_symmetry_and_ratio():
    bench = get_benchmark("ring2d")
    z = full_space_normalizer(bench)
    p10 = exact_density(bench, np.array([1.0, 0.0]), z)
    p01 = exact_density(bench, np.array([0.0, 1.0]), z)
    p00 = exact_density(bench, np.array([0.0, 0.0]), z)
    assert abs(p10 - p01) < 1e-15
    assert abs(p10 / p00 - math.exp(2.0)) < 1e-10


@pytest.mark.parametrize("name", ALL_NAMES)
def test_density_maximal_at_potential_minimizer(name, rng):
    bench = get_benchmark(name)
    z = full_space_normalizer(bench)
    # crude minimizer search: best of many support samples, then compare
    x = _support_points(bench, 4000, rng)
    h_vals = bench.H(x)
    best = x[np.argmin(h_vals)]
    p_best = exact_density(bench, best, z)
    p_samples = exact_density(bench, x, z)
    assert p_best >= p_samples.max() * (1.0 - 1e-12)


def test_unknown_benchmark_name():
    with pytest.raises(KeyError):
        get_benchmark("nosuch")
