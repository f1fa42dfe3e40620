"""Shared finite-difference oracles and fixtures."""

import numpy as np
import pytest

from fptnn.geometry import Domain
from fptnn.util import make_rng


def fd_gradient(f, x, h=2e-3):
    """Fourth-order central differences of a scalar field, vectorized over rows.

    f maps (n, d) -> (n,); x is (n, d).
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    grad = np.empty((n, d))
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        grad[:, a] = (
            8.0 * (f(x + e) - f(x - e)) - (f(x + 2 * e) - f(x - 2 * e))
        ) / (12.0 * h)
    return grad


def fd_hessian(f, x, h=2e-3):
    """Fourth-order central differences for the full Hessian, vectorized over rows.

    Diagonal entries use the 5-point stencil; mixed entries use Richardson
    extrapolation of the 4-point cross stencil.
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    hess = np.empty((n, d, d))
    f0 = f(x)
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        hess[:, a, a] = (
            -(f(x + 2 * e) + f(x - 2 * e))
            + 16.0 * (f(x + e) + f(x - e))
            - 30.0 * f0
        ) / (12.0 * h * h)
        for b in range(a + 1, d):
            eb = np.zeros(d)
            eb[b] = h

            def cross(step_a, step_b):
                return (
                    f(x + step_a + step_b)
                    - f(x + step_a - step_b)
                    - f(x - step_a + step_b)
                    + f(x - step_a - step_b)
                )

            d_h = cross(e, eb) / (4.0 * h * h)
            d_2h = cross(2 * e, 2 * eb) / (16.0 * h * h)
            mixed = (4.0 * d_h - d_2h) / 3.0
            hess[:, a, b] = mixed
            hess[:, b, a] = mixed
    return hess


def fd_scalar_jet(f, x, h=1e-4):
    """(value, first, second derivative) of a scalar map by central differences."""
    return (
        f(x),
        (f(x + h) - f(x - h)) / (2 * h),
        (f(x + h) - 2 * f(x) + f(x - h)) / (h * h),
    )


def central_gradient(f, vec, h=1e-4):
    """Central differences of a scalar function of a parameter vector."""
    vec = np.asarray(vec, dtype=float)
    g = np.empty_like(vec)
    for i in range(vec.size):
        vp = vec.copy()
        vp[i] += h
        vm = vec.copy()
        vm[i] -= h
        g[i] = (f(vp) - f(vm)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return make_rng(20240811, "tests")


@pytest.fixture
def square_domain():
    return Domain(np.array([0.1, -0.2]), np.array([2.0, 2.2]))
