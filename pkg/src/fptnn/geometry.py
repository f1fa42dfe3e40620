"""Numerical-support estimation from SDE trajectories, and support refinement."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDomainError, DivergenceError
from .util import make_rng

_NOISE_BLOCK = 8192  # steps of noise generated per trajectory at a time


@dataclass(frozen=True)
class Domain:
    """Hyperrectangle ``prod_j [center_j - r_j, center_j + r_j]``."""

    center: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        if self.center.shape != self.r.shape or self.center.ndim != 1:
            raise ValueError("center and r must be 1-D arrays of equal length")
        if not np.all(self.r > 0):
            raise DegenerateDomainError(f"half-edge lengths must be positive, got {self.r}")

    @property
    def d(self):
        return len(self.center)

    @property
    def lo(self):
        return self.center - self.r

    @property
    def hi(self):
        return self.center + self.r

    def volume(self):
        return float(np.prod(2.0 * self.r))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(np.abs(x - self.center) <= self.r, axis=-1)


@dataclass(frozen=True)
class SdeSimConfig:
    """Euler-Maruyama settings for support estimation."""

    step_size: float = 0.001
    burnin_steps: int = 1_000_000
    terminal_steps: int = 1_500_000
    num_trajectories: int = 10
    margin_factor: float = 1.1
    rng_seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0 < self.burnin_steps < self.terminal_steps:
            raise ValueError("need 0 < burnin_steps < terminal_steps")
        if self.margin_factor <= 1.0:
            raise ValueError("margin_factor must exceed 1")


def _apply_sigma(sigma, z, noise):
    """Apply the diffusion square root to a noise increment."""
    if callable(sigma):
        return np.einsum("qij,qj->qi", np.asarray(sigma(z), dtype=float), noise)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 2:
        return np.einsum("ij,qj->qi", sigma, noise)
    return sigma * noise


def euler_maruyama(problem, sigma, z0_set, config):
    """Simulate Q trajectories and return the retained point cloud.

    Every trajectory draws its Gaussian increments from its own
    counter-based stream derived from (rng_seed, index), so the returned
    array is identical no matter how the work is scheduled.  Points from
    steps burnin+1 .. terminal of all trajectories are returned, laid out
    as one (Q * (terminal - burnin), d) array.
    """
    z = np.array(z0_set, dtype=float, copy=True)
    if z.ndim != 2 or z.shape[1] != problem.d:
        raise ValueError(f"initial set must have shape (Q, {problem.d})")
    q = z.shape[0]
    h = config.step_size
    root_h = np.sqrt(h)
    retained = config.terminal_steps - config.burnin_steps
    out = np.empty((retained, q, problem.d))
    rngs = [make_rng(config.rng_seed, "sde-trajectory", k) for k in range(q)]

    t = 0
    while t < config.terminal_steps:
        block = min(_NOISE_BLOCK, config.terminal_steps - t)
        noise = np.stack(
            [rng.normal(0.0, root_h, size=(block, problem.d)) for rng in rngs], axis=1
        )
        z_start = z.copy()
        for i in range(block):
            z = z + np.asarray(problem.f(z), dtype=float) * h + _apply_sigma(
                sigma, z, noise[i]
            )
            step = t + i + 1
            if step > config.burnin_steps:
                out[step - config.burnin_steps - 1] = z
        if not np.all(np.isfinite(z)):
            raise DivergenceError(
                f"non-finite state encountered at step {_find_bad_step(problem, sigma, z_start, noise, t, h)}"
            )
        t += block
    return out.reshape(retained * q, problem.d)


def _find_bad_step(problem, sigma, z, noise, t0, h):
    """Replay a block to name the first step that went non-finite."""
    for i in range(noise.shape[0]):
        z = z + np.asarray(problem.f(z), dtype=float) * h + _apply_sigma(sigma, z, noise[i])
        if not np.all(np.isfinite(z)):
            return t0 + i + 1
    return t0 + noise.shape[0]


def estimate_domain(xi, margin_factor):
    """Center and isotropic half-edge from a trajectory cloud.

    The half-edge is margin_factor * max_j max_i |center_j - z_ij|; the
    absolute value guarantees every sample lies inside the box whenever
    margin_factor >= 1.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.size == 0:
        raise ValueError("empty trajectory point set")
    center = xi.mean(axis=0)
    b = margin_factor * float(np.abs(xi - center).max())
    if b <= 0.0:
        raise DegenerateDomainError("all trajectory points coincide; zero-volume support")
    return center, b, Domain(center, np.full(xi.shape[1], b))


def estimate_domain_anisotropic(xi):
    """Per-dimension half-edges r_j = max_i |center_j - z_ij| (no margin)."""
    xi = np.asarray(xi, dtype=float)
    if xi.size == 0:
        raise ValueError("empty trajectory point set")
    center = xi.mean(axis=0)
    r = np.abs(xi - center).max(axis=0)
    if np.any(r <= 0.0):
        raise DegenerateDomainError(f"degenerate half-edge in some dimension: {r}")
    return Domain(center, r)


def refine_domain(box_integral, initial_half_edge, candidates, threshold):
    """Smallest candidate half-edge whose centered-box integral reaches the threshold.

    ``box_integral`` maps a half-edge length to the model's integral over the
    centered sub-box.  Candidates are scanned in ascending order; a candidate
    qualifies when its integral is >= threshold (inclusive, so reference
    tables rounded to the threshold reproduce their published selections).
    If no candidate qualifies the initial half-edge is returned.
    """
    for r in sorted(candidates):
        if box_integral(float(r)) >= threshold:
            return float(r)
    return float(initial_half_edge)
