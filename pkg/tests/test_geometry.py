"""SDE simulation, support estimation and refinement."""

import numpy as np
import pytest

from fptnn.benchmarks import get_benchmark
from fptnn.errors import DegenerateDomainError, DivergenceError
from fptnn.geometry import (
    Domain,
    SdeSimConfig,
    estimate_domain,
    estimate_domain_anisotropic,
    euler_maruyama,
    refine_domain,
)
from fptnn.problem import Problem


def _free_problem(d, drift):
    return Problem(
        d=d,
        f=drift,
        div_f=lambda x: np.zeros(np.asarray(x).shape[:-1]),
        D=lambda x: np.broadcast_to(np.eye(d), np.asarray(x).shape[:-1] + (d, d)),
    )


class TestDomain:
    def test_bounds_and_volume(self):
        dom = Domain(np.array([1.0, -1.0]), np.array([2.0, 0.5]))
        np.testing.assert_allclose(dom.lo, [-1.0, -1.5])
        np.testing.assert_allclose(dom.hi, [3.0, -0.5])
        assert dom.volume() == 4.0
        assert dom.contains([0.0, -1.2])
        assert not dom.contains([0.0, 0.1])

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateDomainError):
            Domain(np.zeros(2), np.array([1.0, 0.0]))


class TestSimConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            SdeSimConfig(burnin_steps=10, terminal_steps=10)
        with pytest.raises(ValueError):
            SdeSimConfig(margin_factor=1.0)
        with pytest.raises(ValueError):
            SdeSimConfig(step_size=0.0)


class TestEulerMaruyama:
    def test_zero_dynamics_stays_put(self):
        prob = _free_problem(2, lambda x: np.zeros_like(np.asarray(x, dtype=float)))
        config = SdeSimConfig(burnin_steps=5, terminal_steps=25, num_trajectories=3, rng_seed=1)
        xi = euler_maruyama(prob, 0.0, np.zeros((3, 2)), config)
        assert xi.shape == (60, 2)
        assert np.all(xi == 0.0)

    def test_retained_count_and_determinism(self):
        prob = _free_problem(1, lambda x: -np.asarray(x, dtype=float))
        config = SdeSimConfig(
            step_size=0.01, burnin_steps=50, terminal_steps=150, num_trajectories=4, rng_seed=7
        )
        a = euler_maruyama(prob, np.sqrt(2.0), np.zeros((4, 1)), config)
        b = euler_maruyama(prob, np.sqrt(2.0), np.zeros((4, 1)), config)
        assert a.shape == (400, 1)
        assert np.array_equal(a, b)

    def test_ou_stationary_moments(self):
        # f = -x, sigma = sqrt(2): the invariant law is N(0, 1)
        prob = _free_problem(1, lambda x: -np.asarray(x, dtype=float))
        config = SdeSimConfig(
            step_size=0.001,
            burnin_steps=50_000,
            terminal_steps=100_000,
            num_trajectories=10,
            rng_seed=3,
        )
        xi = euler_maruyama(prob, np.sqrt(2.0), np.zeros((10, 1)), config)
        assert xi.shape[0] == 500_000
        assert abs(xi.mean()) < 0.05
        assert abs(xi.var() - 1.0) < 0.1

    def test_divergence_reported_with_step(self):
        # cubic drift with a huge step blows up by design
        prob = _free_problem(1, lambda x: np.asarray(x, dtype=float) ** 3)
        config = SdeSimConfig(
            step_size=0.5, burnin_steps=1, terminal_steps=4000, num_trajectories=1, rng_seed=0
        )
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DivergenceError, match="step"):
                euler_maruyama(prob, 1.0, np.full((1, 1), 2.0), config)

    def test_matrix_sigma_accepted(self):
        prob = _free_problem(2, lambda x: np.zeros_like(np.asarray(x, dtype=float)))
        config = SdeSimConfig(burnin_steps=2, terminal_steps=10, num_trajectories=2, rng_seed=5)
        sig = np.array([[1.0, 0.5], [0.0, 1.0]])
        xi = euler_maruyama(prob, sig, np.zeros((2, 2)), config)
        assert xi.shape == (16, 2)
        assert np.all(np.isfinite(xi))


class TestEstimateDomain:
    def test_two_point_cloud(self):
        center, b, dom = estimate_domain(np.array([[0.0, 0.0], [2.0, 0.0]]), 1.1)
        np.testing.assert_allclose(center, [1.0, 0.0])
        assert abs(b - 1.1) < 1e-15
        np.testing.assert_allclose(dom.r, [1.1, 1.1])

    def test_single_point_degenerate(self):
        with pytest.raises(DegenerateDomainError):
            estimate_domain(np.array([[0.5, 0.5]]), 1.1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            estimate_domain(np.empty((0, 2)), 1.1)

    def test_all_samples_contained(self, rng):
        xi = rng.standard_normal((500, 3)) * np.array([1.0, 5.0, 0.1])
        _, _, dom = estimate_domain(xi, 1.0001)
        assert np.all(dom.contains(xi))

    def test_anisotropic_example(self):
        dom = estimate_domain_anisotropic(np.array([[0.0, 0.0], [2.0, 4.0]]))
        np.testing.assert_allclose(dom.center, [1.0, 2.0])
        np.testing.assert_allclose(dom.r, [1.0, 2.0])

    def test_anisotropic_reflection_invariance(self, rng):
        xi = rng.standard_normal((300, 2))
        xi = np.concatenate([xi, xi * np.array([1.0, -1.0])])  # symmetric in dim 2
        dom = estimate_domain_anisotropic(xi)
        reflected = estimate_domain_anisotropic(xi * np.array([1.0, -1.0]))
        assert abs(dom.r[1] - reflected.r[1]) < 1e-12


# Reference refinement grids with their published integrals; the expected
# half-edge is the one the corresponding study selected.
_REFINEMENT_TABLES = {
    "unimode4d": (
        {0.4: 0.138, 0.8: 0.703, 1.2: 0.964, 1.6: 0.996, 2.0: 0.999, 2.4: 0.999, 2.6472: 1.0},
        0.999,
        2.0,
    ),
    "unimode6d": (
        {0.2: 0.002, 0.4: 0.081, 0.6: 0.344, 0.8: 0.739, 1.0: 0.979, 1.2: 0.998,
         1.4: 0.999, 1.5191: 1.0},
        0.99,
        1.2,
    ),
    "multimode6d": (
        {1.2: 0.227, 1.6: 0.494, 2.0: 0.661, 2.4: 0.752, 2.8: 0.809, 3.2: 0.853,
         3.6: 0.896, 4.0: 0.940, 4.4: 0.978, 4.8: 0.997, 5.2: 0.999, 5.2872: 1.0},
        0.97,
        4.4,
    ),
}


class TestRefineDomain:
    @pytest.mark.parametrize("name", sorted(_REFINEMENT_TABLES))
    def test_published_tables(self, name):
        table, threshold, expected = _REFINEMENT_TABLES[name]
        bench = get_benchmark(name)
        candidates = bench.refine_candidates
        assert bench.refine_threshold == threshold
        r_star = refine_domain(lambda r: table[r], max(table), candidates, threshold)
        assert r_star == expected

    def test_ten_d_integral_table(self):
        table = {0.3: 0.00, 0.6: 0.017, 0.9: 0.132, 1.2: 0.277, 1.5: 0.476,
                 1.8: 0.784, 2.1: 0.967, 2.4: 0.999}
        assert refine_domain(lambda r: table[r], 2.858, sorted(table), 0.97) == 2.4

    def test_smaller_threshold_prefers_smaller_box(self):
        table, _, _ = _REFINEMENT_TABLES["unimode4d"]
        r_star = refine_domain(lambda r: table[r], 2.6472, sorted(table), 0.95)
        assert r_star == 1.2  # first candidate above 0.95, not merely any

    def test_zero_threshold_returns_smallest(self):
        r_star = refine_domain(lambda r: 0.5, 3.0, [0.7, 1.4, 2.1], 0.0)
        assert r_star == 0.7

    def test_exact_threshold_qualifies(self):
        # inclusive comparison: a rounded table entry equal to the threshold
        # reproduces the published selection instead of falling back
        r_star = refine_domain(lambda r: 0.97, 3.0, [0.7, 1.4, 2.1], 0.97)
        assert r_star == 0.7

    def test_below_threshold_everywhere_falls_back(self):
        r_star = refine_domain(lambda r: 0.5, 3.0, [0.7, 1.4, 2.1], 0.97)
        assert r_star == 3.0

    def test_empty_candidates_fall_back(self):
        assert refine_domain(lambda r: 1.0, 2.5, [], 0.9) == 2.5

    def test_result_unique_given_monotone_integrals(self, rng):
        # nondecreasing integrals make the answer independent of scan order
        candidates = np.sort(rng.random(8) * 3.0)
        values = np.sort(rng.random(8))
        table = dict(zip(candidates, values))
        threshold = 0.5
        r_star = refine_domain(lambda r: table[r], 3.0, candidates, threshold)
        above = [r for r, v in table.items() if v >= threshold]
        assert r_star == (min(above) if above else 3.0)
