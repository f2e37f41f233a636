"""Plant, cost weights, and process-noise description.

One convention holds everywhere: noise statistics always describe the
state-space disturbance w in x' = Ax + Bu + w. Distributions specified in
input coordinates (disturbances added to u) are pushed through B first, so
every closed-form expression downstream lives in a single convention.

The weighted noise statistics carried by :class:`NoiseModel` are

    wbar = E[w]
    W    = E[(w - wbar)(w - wbar)']
    M3   = E[(w - wbar)(w - wbar)' Q (w - wbar)]
    m4   = E[((w - wbar)' Q (w - wbar) - tr(WQ))^2]

with Q the state cost weight. M3 and m4 therefore depend on Q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DefinitenessError, DimensionError, NumericalError
from .linalg import (
    as_matrix,
    as_square,
    as_vector,
    require_pd,
    require_psd,
    solve_dare,
    symmetrize,
)

__all__ = [
    "Gaussian",
    "GaussianMixture",
    "Deterministic",
    "NoiseStats",
    "NoiseModel",
    "LinearSystem",
    "RiskSpec",
    "estimate_noise_stats",
    "uav_benchmark",
]

# Chunk used by every batched sampling loop; fixed so that draws are
# reproducible regardless of how many samples a caller requests at once.
_CHUNK = 1 << 16


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (works for singular covariances)."""
    eigval, eigvec = np.linalg.eigh(cov)
    eigval = np.clip(eigval, 0.0, None)
    return eigvec * np.sqrt(eigval)


@dataclass(frozen=True)
class Gaussian:
    """Multivariate normal disturbance."""

    mean: np.ndarray
    cov: np.ndarray

    kind = "gaussian"

    def __post_init__(self):
        mean = as_vector(self.mean, name="noise mean")
        cov = require_psd(self.cov, "noise covariance")
        if cov.shape[0] != mean.shape[0]:
            raise DimensionError("noise mean and covariance dimensions differ")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_factor", _psd_factor(cov))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        z = rng.standard_normal((size, self.dim))
        return self.mean + z @ self._factor.T

    def pushforward(self, B) -> "Gaussian":
        B = as_matrix(B, "B")
        return Gaussian(B @ self.mean, symmetrize(B @ self.cov @ B.T))

    def mean_vector(self) -> np.ndarray:
        return self.mean.copy()

    def covariance(self) -> np.ndarray:
        return self.cov.copy()

    def m3_weighted(self, Q) -> np.ndarray:
        return np.zeros(self.dim)

    def m4_weighted(self, Q) -> float:
        QS = Q @ self.cov
        return float(2.0 * np.trace(QS @ QS))


@dataclass(frozen=True)
class GaussianMixture:
    """Finite mixture of multivariate normals.

    All central moments used by the risk reformulation have closed forms:
    writing d_i = mu_i - mu for the component mean offsets,

        W  = sum_i p_i (S_i + d_i d_i')
        M3 = sum_i p_i [2 S_i Q d_i + d_i (tr(Q S_i) + d_i' Q d_i)]
        E[(delta' Q delta)^2] = sum_i p_i [tr(Q S_i)^2 + 2 tr((Q S_i)^2)
                                 + 4 d_i' Q S_i Q d_i + c_i^2 + 2 c_i tr(Q S_i)]

    with c_i = d_i' Q d_i and m4 = E[(delta' Q delta)^2] - tr(WQ)^2.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    kind = "gaussian_mixture"

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covs, dtype=float)
        if weights.ndim != 1 or weights.size < 1:
            raise DimensionError("mixture weights must be a non-empty 1-d array")
        if abs(weights.sum() - 1.0) > 1e-12 or np.any(weights < 0):
            raise ConfigError("mixture weights must be nonnegative and sum to 1")
        if means.ndim != 2 or means.shape[0] != weights.size:
            raise DimensionError("mixture means must be (components, dim)")
        if covs.shape != (weights.size, means.shape[1], means.shape[1]):
            raise DimensionError("mixture covs must be (components, dim, dim)")
        covs = np.stack([require_psd(c, "mixture covariance") for c in covs])
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "_factors", np.stack([_psd_factor(c) for c in covs]))
        cum = np.cumsum(weights)
        cum[-1] = 1.0
        object.__setattr__(self, "_cum_weights", cum)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # Component selection by inverse CDF on one uniform batch: much faster
        # than Generator.choice and an explicit part of the seeding contract.
        comp = np.searchsorted(self._cum_weights, rng.random(size), side="right")
        z = rng.standard_normal((size, self.dim))
        return self.means[comp] + np.einsum("sij,sj->si", self._factors[comp], z)

    def pushforward(self, B) -> "GaussianMixture":
        B = as_matrix(B, "B")
        means = self.means @ B.T
        covs = np.stack([symmetrize(B @ c @ B.T) for c in self.covs])
        return GaussianMixture(self.weights.copy(), means, covs)

    def mean_vector(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        mu = self.mean_vector()
        d = self.means - mu
        W = np.einsum("i,ijk->jk", self.weights, self.covs)
        W = W + np.einsum("i,ij,ik->jk", self.weights, d, d)
        return symmetrize(W)

    def m3_weighted(self, Q) -> np.ndarray:
        Q = np.asarray(Q, dtype=float)
        mu = self.mean_vector()
        out = np.zeros(self.dim)
        for p, m, S in zip(self.weights, self.means, self.covs):
            d = m - mu
            out += p * (2.0 * S @ Q @ d + d * (np.trace(Q @ S) + d @ Q @ d))
        return out

    def m4_weighted(self, Q) -> float:
        Q = np.asarray(Q, dtype=float)
        mu = self.mean_vector()
        second = 0.0
        for p, m, S in zip(self.weights, self.means, self.covs):
            d = m - mu
            QS = Q @ S
            tr_QS = np.trace(QS)
            c = d @ Q @ d
            second += p * (tr_QS**2 + 2.0 * np.trace(QS @ QS) + 4.0 * d @ QS @ Q @ d + c**2 + 2.0 * c * tr_QS)
        tr_WQ = np.trace(self.covariance() @ Q)
        return float(second - tr_WQ**2)


@dataclass(frozen=True)
class Deterministic:
    """Disturbance frozen at a constant vector (zero-variance limit)."""

    value: np.ndarray

    kind = "deterministic"

    def __post_init__(self):
        object.__setattr__(self, "value", as_vector(self.value, name="noise value"))

    @property
    def dim(self) -> int:
        return self.value.shape[0]

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.broadcast_to(self.value, (size, self.dim)).copy()

    def pushforward(self, B) -> "Deterministic":
        return Deterministic(as_matrix(B, "B") @ self.value)

    def mean_vector(self) -> np.ndarray:
        return self.value.copy()

    def covariance(self) -> np.ndarray:
        return np.zeros((self.dim, self.dim))

    def m3_weighted(self, Q) -> np.ndarray:
        return np.zeros(self.dim)

    def m4_weighted(self, Q) -> float:
        return 0.0


@dataclass(frozen=True)
class NoiseStats:
    wbar: np.ndarray
    W: np.ndarray
    M3: np.ndarray
    m4: float


def _resolve_draw(sampler):
    if hasattr(sampler, "sample"):
        return sampler.sample
    if hasattr(sampler, "draw"):
        return sampler.draw
    if callable(sampler):
        return sampler
    raise ConfigError("sampler must expose draw(rng, size) / sample(rng, size) or be callable")


def estimate_noise_stats(sampler, Q, sample_count: int, seed: int = 0) -> NoiseStats:
    """Monte Carlo estimate of (wbar, W, M3, m4) from a seeded sampler.

    Two passes over an identical sample stream (the generator is re-seeded
    between passes), chunked so memory stays bounded; deterministic given the
    seed. sample_count below 10^4 is rejected: fourth-moment estimates are
    meaningless with fewer samples.
    """
    if sample_count < 10_000:
        raise ConfigError(f"sample_count must be at least 10000, got {sample_count}")
    Q = require_psd(Q, "Q")
    draw = _resolve_draw(sampler)

    rng = np.random.default_rng(seed)
    total = np.zeros(Q.shape[0])
    done = 0
    while done < sample_count:
        w = draw(rng, min(_CHUNK, sample_count - done))
        total += w.sum(axis=0)
        done += w.shape[0]
    wbar = total / sample_count

    rng = np.random.default_rng(seed)
    W_sum = np.zeros_like(Q)
    M3_sum = np.zeros(Q.shape[0])
    s_sum = 0.0
    s2_sum = 0.0
    done = 0
    while done < sample_count:
        w = draw(rng, min(_CHUNK, sample_count - done))
        d = w - wbar
        W_sum += d.T @ d
        s = np.einsum("ti,ij,tj->t", d, Q, d)
        M3_sum += d.T @ s
        s_sum += s.sum()
        s2_sum += (s * s).sum()
        done += w.shape[0]
    W = symmetrize(W_sum / sample_count)
    M3 = M3_sum / sample_count
    tr_WQ = float(np.trace(W @ Q))
    m4 = s2_sum / sample_count - 2.0 * tr_WQ * (s_sum / sample_count) + tr_WQ**2
    return NoiseStats(wbar=wbar, W=W, M3=M3, m4=float(max(m4, 0.0)))


@dataclass(frozen=True)
class NoiseModel:
    """A state-space disturbance distribution together with its weighted statistics.

    Sampling is stateful per generator: concurrent users must each own an
    independent ``numpy.random.Generator`` (fork by seed), never share one.
    When ``bound_v`` is set, samples are rejection-truncated to the ball of
    that radius and the stored statistics describe the truncated law.
    """

    dist: Gaussian | GaussianMixture | Deterministic
    wbar: np.ndarray
    W: np.ndarray
    M3: np.ndarray
    m4: float
    bound_v: float | None = None

    def __post_init__(self):
        wbar = as_vector(self.wbar, name="wbar")
        W = require_psd(self.W, "W")
        M3 = as_vector(self.M3, dim=wbar.shape[0], name="M3")
        if W.shape[0] != wbar.shape[0]:
            raise DimensionError("wbar and W dimensions differ")
        if self.m4 < 0:
            raise DefinitenessError(f"m4 must be nonnegative, got {self.m4}")
        if self.bound_v is not None and self.bound_v <= 0:
            raise ConfigError("bound_v must be positive when set")
        object.__setattr__(self, "wbar", wbar)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "M3", M3)
        object.__setattr__(self, "m4", float(self.m4))

    @property
    def dim(self) -> int:
        return self.wbar.shape[0]

    @classmethod
    def from_distribution(
        cls,
        dist,
        Q,
        enters_via_B=None,
        bound_v: float | None = None,
        cov_regularization: float = 0.0,
        stat_samples: int = 2_000_000,
        stat_seed: int = 0,
    ) -> "NoiseModel":
        """Build a model from a distribution, with exact moments where possible.

        With ``enters_via_B`` set, the distribution lives in input coordinates
        and is mapped through B into state space first. Unbounded distributions
        get exact closed-form statistics; truncation (``bound_v``) invalidates
        the closed forms, so the statistics are then re-estimated by Monte
        Carlo on the truncated sampler. ``cov_regularization`` adds eps*I to W
        for experiments that need a strictly positive covariance.
        """
        if enters_via_B is not None:
            dist = dist.pushforward(enters_via_B)
        Q = require_psd(Q, "Q")
        if Q.shape[0] != dist.dim:
            raise DimensionError("Q dimension does not match the state-space noise dimension")
        if bound_v is None:
            stats = NoiseStats(
                wbar=dist.mean_vector(),
                W=dist.covariance(),
                M3=dist.m3_weighted(Q),
                m4=dist.m4_weighted(Q),
            )
        else:
            probe = cls(
                dist=dist,
                wbar=np.zeros(dist.dim),
                W=np.zeros((dist.dim, dist.dim)),
                M3=np.zeros(dist.dim),
                m4=0.0,
                bound_v=bound_v,
            )
            stats = estimate_noise_stats(probe, Q, stat_samples, seed=stat_seed)
        W = stats.W
        if cov_regularization > 0.0:
            W = W + cov_regularization * np.eye(dist.dim)
        return cls(dist=dist, wbar=stats.wbar, W=W, M3=stats.M3, m4=stats.m4, bound_v=bound_v)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` disturbance vectors, rejection-truncating if bounded."""
        w = self.dist.draw(rng, size)
        if self.bound_v is None:
            return w
        bound_sq = self.bound_v**2
        for _ in range(1000):
            bad = np.einsum("ti,ti->t", w, w) > bound_sq
            n_bad = int(bad.sum())
            if n_bad == 0:
                return w
            w[bad] = self.dist.draw(rng, n_bad)
        raise NumericalError(
            f"rejection sampling failed: almost no mass inside radius {self.bound_v}"
        )


@dataclass(frozen=True)
class LinearSystem:
    """Plant matrices (A, B) with cost weights (Q, R).

    Construction validates Q PSD, R PD, and certifies stabilizability of
    (A, B) by solving the Riccati equation for the slightly regularized
    weight Q + eps*I (eps = 1e-9), which also guards detectability.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = as_square(self.A, "A")
        B = as_matrix(self.B, "B")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got {B.shape}")
        Q = require_psd(self.Q, "Q")
        if Q.shape != A.shape:
            raise DimensionError("Q must match the state dimension")
        R = require_pd(self.R, "R")
        if R.shape[0] != B.shape[1]:
            raise DimensionError("R must match the input dimension")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        # Stabilizability certificate: the Riccati solve fails otherwise.
        solve_dare(A, B, Q + 1e-9 * np.eye(A.shape[0]), R)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class RiskSpec:
    """User risk tolerance rho and its reformulated counterpart rho_bar.

    The two are tied by rho_bar = rho - m4 + 4 tr((WQ)^2); construct through
    one of the classmethods so the pair is always consistent with the owning
    noise statistics and state weight.
    """

    rho: float
    rho_bar: float

    def __post_init__(self):
        if not np.isfinite(self.rho) or self.rho <= 0:
            raise ConfigError(f"rho must be a positive real, got {self.rho}")
        if not np.isfinite(self.rho_bar):
            raise ConfigError("rho_bar must be finite")

    @staticmethod
    def _shift(noise: NoiseModel, Q) -> float:
        WQ = noise.W @ np.asarray(Q, dtype=float)
        return float(-noise.m4 + 4.0 * np.trace(WQ @ WQ))

    @classmethod
    def from_rho(cls, rho: float, noise: NoiseModel, Q) -> "RiskSpec":
        return cls(rho=float(rho), rho_bar=float(rho) + cls._shift(noise, Q))

    @classmethod
    def from_rho_bar(cls, rho_bar: float, noise: NoiseModel, Q) -> "RiskSpec":
        return cls(rho=float(rho_bar) - cls._shift(noise, Q), rho_bar=float(rho_bar))


def uav_benchmark(cov_regularization: float = 0.0):
    """The planar-drone double-integrator benchmark instance.

    Returns (system, noise, risk, initial_policy): a 4-state / 2-input double
    integrator with sampling time 0.5, state weight diag(1, 0.1, 2, 0.2) and
    unit input weight. Wind enters through B; its first input coordinate is a
    two-component Gaussian mixture (mean 3 variance 30 with weight 0.2, mean 8
    variance 60 with weight 0.8) and the second is zero-mean with variance
    0.01. The initial gain pair is stabilizing, with the affine term
    cancelling most of the mean wind.

    The risk budget is rho = 15 on the one-step predictive variance, which
    reformulates to rho_bar = 15 - m4 + 4 tr((WQ)^2) ~ 26.105 on the average
    risk cost. Reading the budget as rho_bar = 15 directly would make the
    instance infeasible: the stationary covariance of any stabilizing policy
    dominates the one-step noise passthrough W, forcing
    J_c >= 4 tr(QWQ W) - M3-correction = 22.105 > 15, so no policy could
    satisfy the constraint and the multiplier would diverge. With rho = 15
    the constrained problem is strictly feasible while the unconstrained
    optimum still violates the budget (J_c(X*(0)) ~ 85.1 > 26.105), which is
    the nontrivial regime the benchmark is meant to exercise.
    """
    from .policy import Policy

    A = np.array(
        [
            [1.0, 0.5, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.5],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    B = np.array(
        [
            [0.125, 0.0],
            [0.5, 0.0],
            [0.0, 0.125],
            [0.0, 0.5],
        ]
    )
    Q = np.diag([1.0, 0.1, 2.0, 0.2])
    R = np.diag([1.0, 1.0])
    system = LinearSystem(A=A, B=B, Q=Q, R=R)

    wind = GaussianMixture(
        weights=np.array([0.2, 0.8]),
        means=np.array([[3.0, 0.0], [8.0, 0.0]]),
        covs=np.array([np.diag([30.0, 0.01]), np.diag([60.0, 0.01])]),
    )
    noise = NoiseModel.from_distribution(
        wind, Q, enters_via_B=B, cov_regularization=cov_regularization
    )
    risk = RiskSpec.from_rho(15.0, noise, Q)

    K0 = np.array(
        [
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.5],
        ]
    )
    l0 = np.array([-6.0, 0.0])
    return system, noise, risk, Policy(K=K0, l=l0)
