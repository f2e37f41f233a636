"""Seeded generators of random test instances and stabilizing policies.

Shared by the verification suite and the tests: every sampler takes an
explicit ``numpy.random.Generator`` so instances are reproducible.
"""

from __future__ import annotations

import numpy as np

from .analytic import RiskLagrangian, evaluate, stationary_point
from .errors import InstabilityError, NonConvergenceError, NumericalError
from .linalg import spectral_radius, symmetrize
from .model import Gaussian, GaussianMixture, LinearSystem, NoiseModel, RiskSpec
from .policy import Policy, is_stabilizing

__all__ = [
    "random_stable_matrix",
    "random_instance",
    "sample_stabilizing_policies",
    "sample_sublevel_policies",
]


def random_stable_matrix(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """Random n x n matrix rescaled to the requested spectral radius."""
    M = rng.standard_normal((n, n))
    rho = spectral_radius(M)
    if rho == 0.0:
        return M
    return M * (radius / rho)


def _random_psd(rng, n, scale=1.0):
    C = rng.standard_normal((n, n)) / np.sqrt(n)
    return symmetrize(scale * C @ C.T)


def random_instance(rng: np.random.Generator, n: int, m: int, mixture: bool = False,
                    open_loop_radius: float = 1.1):
    """Random stabilizable (system, noise, risk) triple with a known stabilizing policy.

    The open loop is scaled near instability so stabilization is nontrivial;
    noise is Gaussian by default or a skewed two-component mixture when
    ``mixture`` is set. Retries internally until the stabilizability
    certificate passes. Returns (system, noise, spec, stabilizing_policy).
    """
    for _ in range(50):
        A = random_stable_matrix(rng, n, open_loop_radius * rng.uniform(0.5, 1.0))
        B = rng.standard_normal((n, m))
        Q = _random_psd(rng, n) + 0.1 * np.eye(n)
        R = _random_psd(rng, m) + 0.5 * np.eye(m)
        try:
            system = LinearSystem(A=A, B=B, Q=Q, R=R)
        except (NonConvergenceError, NumericalError):
            continue
        if mixture:
            mu1 = rng.standard_normal(n)
            mu2 = rng.standard_normal(n)
            dist = GaussianMixture(
                weights=np.array([0.3, 0.7]),
                means=np.stack([mu1, mu2]),
                covs=np.stack([_random_psd(rng, n, 0.5) + 0.05 * np.eye(n),
                               _random_psd(rng, n, 0.5) + 0.05 * np.eye(n)]),
            )
        else:
            dist = Gaussian(mean=0.3 * rng.standard_normal(n),
                            cov=_random_psd(rng, n, 0.5) + 0.05 * np.eye(n))
        noise = NoiseModel.from_distribution(dist, Q)
        spec = RiskSpec.from_rho(1.0 + rng.uniform(0.0, 10.0), noise, Q)
        rl = RiskLagrangian(system, noise, spec, 0.0)
        policy = stationary_point(rl)
        if is_stabilizing(system, policy, margin=0.02):
            return system, noise, spec, policy
    raise NumericalError("could not draw a usable random instance")


def sample_stabilizing_policies(system, count: int, rng: np.random.Generator,
                                around: Policy, scale: float = 0.3,
                                margin: float = 1e-3) -> list[Policy]:
    """Random stabilizing policies obtained by perturbing an anchor policy.

    Perturbation radii are spread log-uniformly up to ``scale`` times the
    anchor's Frobenius norm (plus one), so the sample covers both the
    immediate neighbourhood and the fringe of the stabilizing set.
    """
    X0 = around.as_matrix()
    base = scale * (1.0 + np.linalg.norm(X0))
    out = []
    attempts = 0
    while len(out) < count and attempts < 200 * count:
        attempts += 1
        radius = base * 10 ** rng.uniform(-2.0, 0.0)
        U = rng.standard_normal(X0.shape)
        U /= np.linalg.norm(U)
        candidate = Policy.from_matrix(X0 + radius * U)
        if is_stabilizing(system, candidate, margin=margin):
            out.append(candidate)
    if len(out) < count:
        raise NumericalError(f"only found {len(out)}/{count} stabilizing policies")
    return out


def sample_sublevel_policies(rl: RiskLagrangian, count: int, rng: np.random.Generator,
                             ceiling: float, around: Policy | None = None) -> list[Policy]:
    """Random stabilizing policies whose exact Lagrangian stays below ``ceiling``."""
    anchor = around if around is not None else stationary_point(rl)
    out = []
    attempts = 0
    while len(out) < count and attempts < 500 * count:
        attempts += 1
        for candidate in sample_stabilizing_policies(rl.sys, 1, rng, anchor):
            try:
                if evaluate(rl, candidate).L_value <= ceiling:
                    out.append(candidate)
            except InstabilityError:
                pass
    if len(out) < count:
        raise NumericalError(f"only found {len(out)}/{count} sublevel policies")
    return out
