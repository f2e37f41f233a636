"""The two learning loops: zeroth-order random search and primal-dual ascent.

Random search minimizes the Lagrangian at fixed multiplier using one-point
gradient estimates from the rollout oracle; the primal-dual loop alternates
an inner Lagrangian minimization (exact Riccati solve or random search) with
a projected subgradient step on the multiplier.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .analytic import RiskLagrangian, dual_value, evaluate, stationary_point
from .errors import (
    ConfigError,
    DivergenceError,
    InstabilityError,
    NonConvergenceError,
    SearchFailure,
)
from .linalg import spectral_radius
from .model import LinearSystem, NoiseModel, RiskSpec
from .oracle import RolloutConfig, rollout_cost
from .policy import Policy, closed_loop, is_stabilizing

__all__ = [
    "RandomSearchConfig",
    "PrimalDualConfig",
    "IterateLog",
    "zeroth_order_gradient",
    "random_search",
    "dual_subgradient",
    "primal_dual",
]

_SAFEGUARDS = ("none", "reject_unstable", "sublevel")
_PERTURBATIONS = ("sphere", "ball")
_ESTIMATORS = ("antithetic", "one_point")
_SCHEDULES = ("diminishing", "constant")
_INNER = ("exact", "random_search")


@dataclass(frozen=True)
class RandomSearchConfig:
    """Hyperparameters of the zeroth-order random search.

    Defaults follow the benchmark settings: smoothing radius 0.2, step size
    1e-5, oracle horizon 100. The safeguard controls what happens when an
    update would leave the stabilizing set: "reject_unstable" halves the step
    (up to max_step_halvings) and skips the update if that fails;
    "sublevel" additionally rejects iterates whose exact Lagrangian exceeds
    L(X0) + sublevel_factor * (L(X0) - D(mu)); "none" applies updates blindly.

    The default estimator averages the one-point estimates taken at the
    antithetic perturbation pair X + rU and X - rU (two oracle queries per
    iteration). The pair average cancels the large common cost level that
    otherwise dominates the estimate's variance: the single-query
    "one_point" mode is selectable for ablation but its variance floor is
    orders of magnitude above the level descent can reach at practical step
    sizes.
    """

    iterations_N: int
    radius_r: float = 0.2
    step_eta: float = 1e-5
    oracle_T: int = 100
    oracle_burn_in: int = 0
    seed: int = 0
    estimator: str = "antithetic"
    safeguard: str = "reject_unstable"
    sublevel_factor: float = 10.0
    perturbation: str = "sphere"
    snapshot_every: int = 0
    max_perturb_retries: int = 10
    max_step_halvings: int = 10
    divergence_guard: float = 1e9
    diagnose_stepsize: bool = False

    def __post_init__(self):
        if self.iterations_N < 1:
            raise ConfigError("iterations_N must be >= 1")
        if self.radius_r <= 0:
            raise ConfigError("radius_r must be positive")
        if self.step_eta <= 0:
            raise ConfigError("step_eta must be positive")
        if self.oracle_T < 1:
            raise ConfigError("oracle_T must be >= 1")
        if self.safeguard not in _SAFEGUARDS:
            raise ConfigError(f"safeguard must be one of {_SAFEGUARDS}")
        if self.perturbation not in _PERTURBATIONS:
            raise ConfigError(f"perturbation must be one of {_PERTURBATIONS}")
        if self.estimator not in _ESTIMATORS:
            raise ConfigError(f"estimator must be one of {_ESTIMATORS}")


@dataclass(frozen=True)
class PrimalDualConfig:
    """Hyperparameters of the primal-dual loop.

    The diminishing schedule emits xi_j = step_scale * sqrt(2/j); with
    step_scale unset it is calibrated from the first measured subgradient so
    that xi_1 is about 0.1 * rho_bar / |omega_1|. In exact mode the returned
    pair is refined after the subgradient iterations by bisection on the
    (monotone) constraint value until complementary slackness and the duality
    gap fall below refine_tol; the refined pair is appended to the log as one
    extra row (iteration outer_iters + 1) so aggregate curves end at it.
    """

    mu_init: float = 0.0
    outer_iters: int = 40
    step_schedule: str = "diminishing"
    step_scale: float | None = None
    xi_constant: float | None = None
    inner: str = "exact"
    inner_rs: RandomSearchConfig | None = None
    risk_oracle_T: int = 10_000
    risk_burn_in: int = 0
    seed: int = 0
    warm_start: bool = True
    mu_cap: float = 1e9
    refine: bool = True
    refine_tol: float = 1e-6
    snapshot_every: int = 1

    def __post_init__(self):
        if self.mu_init < 0:
            raise ConfigError("mu_init must be nonnegative")
        if self.outer_iters < 1:
            raise ConfigError("outer_iters must be >= 1")
        if self.step_schedule not in _SCHEDULES:
            raise ConfigError(f"step_schedule must be one of {_SCHEDULES}")
        if self.step_schedule == "constant" and (self.xi_constant is None or self.xi_constant <= 0):
            raise ConfigError("constant schedule needs a positive xi_constant")
        if self.inner not in _INNER:
            raise ConfigError(f"inner must be one of {_INNER}")
        if self.inner == "random_search" and self.inner_rs is None:
            raise ConfigError("random_search inner mode needs inner_rs")
        if self.risk_oracle_T < 1:
            raise ConfigError("risk_oracle_T must be >= 1")


class IterateLog:
    """Append-only per-iteration record of an optimization run.

    Rows carry (iter, mu, L_est, J_est, Jc_est, grad_norm, eta_effective,
    wallclock_ms); unmeasured entries are NaN. Policy snapshots are kept at
    the configured cadence plus the final iterate. The CSV emission zeroes
    the wallclock column by default so reruns are byte-identical.
    """

    COLUMNS = ("iter", "mu", "L_est", "J_est", "Jc_est", "grad_norm", "eta_effective", "wallclock_ms")

    def __init__(self, snapshot_every: int = 0):
        self._rows = {name: [] for name in self.COLUMNS}
        self.snapshots: list[tuple[int, Policy]] = []
        self.snapshot_every = snapshot_every

    def __len__(self) -> int:
        return len(self._rows["iter"])

    def append(self, iteration, mu, L_est, J_est, Jc_est, grad_norm, eta_effective, wallclock_ms):
        row = (iteration, mu, L_est, J_est, Jc_est, grad_norm, eta_effective, wallclock_ms)
        for name, value in zip(self.COLUMNS, row):
            self._rows[name].append(float(value))

    def maybe_snapshot(self, iteration: int, policy: Policy):
        if self.snapshot_every > 0 and (iteration + 1) % self.snapshot_every == 0:
            self.snapshots.append((iteration, policy))

    def force_snapshot(self, iteration: int, policy: Policy):
        if not self.snapshots or self.snapshots[-1][0] != iteration:
            self.snapshots.append((iteration, policy))

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self._rows[name], dtype=float)

    def to_csv(self, path, include_wallclock: bool = False):
        with open(path, "w", newline="") as fh:
            fh.write("# schema: risklqr-iterates v1\n")
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            wall = self._rows["wallclock_ms"]
            for i in range(len(self)):
                row = [self._rows[name][i] for name in self.COLUMNS[:-1]]
                row.append(wall[i] if include_wallclock else 0.0)
                writer.writerow([repr(int(row[0]))] + [repr(v) for v in row[1:]])


def _draw_direction(rng: np.random.Generator, shape: tuple, perturbation: str) -> np.ndarray:
    u = rng.standard_normal(shape)
    u /= np.linalg.norm(u)
    if perturbation == "ball":
        u *= rng.random() ** (1.0 / (shape[0] * shape[1]))
    return u


class _CostQuery:
    """Queries the rollout oracle (or an injected cost function) at trial policies."""

    def __init__(self, rl, rng, oracle_T, burn_in, guard, cost_fn):
        self.rl = rl
        self.rng = rng
        self.oracle_T = oracle_T
        self.burn_in = burn_in
        self.guard = guard
        self.cost_fn = cost_fn

    def __call__(self, X) -> float:
        probe = Policy.from_matrix(X)
        if self.cost_fn is not None:
            return float(self.cost_fn(probe))
        cfg = RolloutConfig(
            horizon_T=self.oracle_T,
            burn_in=self.burn_in,
            seed=int(self.rng.integers(0, 2**63)),
            divergence_guard=self.guard,
        )
        return rollout_cost(self.rl, probe, cfg).L_hat


def _gradient_estimate(X, radius, rng, query, perturbation, retries, antithetic):
    """Gradient estimate at X from one perturbation direction (resampled on divergence).

    The raw one-point estimate is (d / r^2) * L_hat * dX with dX the applied
    perturbation r*U; for unit-Frobenius U this is the unbiased sphere
    estimator of the smoothed-Lagrangian gradient. In antithetic mode the
    estimates at +dX and -dX are averaged, (d / r^2) * (L+ - L-)/2 * dX,
    which cancels the common cost level from the variance.

    Returns (estimate, cost level seen). Raises DivergenceError once all
    `retries` directions have produced a diverging rollout.
    """
    dim = X.shape[0] * X.shape[1]
    last_error = None
    for _ in range(retries):
        dX = radius * _draw_direction(rng, X.shape, perturbation)
        try:
            L_plus = query(X + dX)
            if antithetic:
                L_minus = query(X - dX)
        except (DivergenceError, InstabilityError) as exc:
            last_error = exc
            continue
        if antithetic:
            return (dim / radius**2) * 0.5 * (L_plus - L_minus) * dX, 0.5 * (L_plus + L_minus)
        return (dim / radius**2) * L_plus * dX, L_plus
    raise DivergenceError(
        f"all {retries} perturbations at radius {radius} diverged; "
        "the current iterate is likely outside the stabilizing set"
    ) from last_error


def zeroth_order_gradient(rl, policy: Policy, radius: float, oracle_cfg: RolloutConfig,
                          rng=None, perturbation: str = "sphere", cost_fn=None,
                          max_retries: int = 10, direction=None) -> np.ndarray:
    """Single-query stochastic gradient estimate of the Lagrangian at `policy`.

    Draws one direction on the unit Frobenius sphere (or accepts one through
    `direction`), queries the oracle at the policy perturbed by radius times
    that direction, and scales the perturbation by (d / radius^2) * L_hat.
    """
    if radius <= 0:
        raise ConfigError("radius must be positive")
    if rng is None:
        rng = np.random.default_rng(oracle_cfg.seed)
    query = _CostQuery(rl, rng, oracle_cfg.horizon_T, oracle_cfg.burn_in,
                       oracle_cfg.divergence_guard, cost_fn)
    X = policy.as_matrix()
    if direction is not None:
        dX = radius * np.asarray(direction, dtype=float)
        dim = X.shape[0] * X.shape[1]
        return (dim / radius**2) * query(X + dX) * dX
    estimate, _ = _gradient_estimate(X, radius, rng, query, perturbation, max_retries,
                                     antithetic=False)
    return estimate


def _sublevel_ceiling(rl, p0, factor):
    L0 = evaluate(rl, p0).L_value
    D, _ = dual_value(rl)
    return L0 + factor * (L0 - D)


def random_search(rl: RiskLagrangian, p0: Policy, cfg: RandomSearchConfig,
                  cost_fn=None, gradient_oracle=None) -> tuple[Policy, IterateLog]:
    """Minimize L(., mu) from p0 by zeroth-order gradient descent.

    Returns the final iterate and the full per-iteration log. `cost_fn`
    (maps Policy -> cost) replaces the rollout oracle, and `gradient_oracle`
    (maps Policy -> gradient array) replaces the whole estimator; both exist
    for verification harnesses that need the exact-gradient limit.
    """
    sys = rl.sys
    if not is_stabilizing(sys, p0):
        rho = spectral_radius(closed_loop(sys, p0))
        raise InstabilityError(
            f"random_search requires a stabilizing initial policy (spectral radius {rho:.6g})"
        )
    X = p0.as_matrix()
    rng = np.random.default_rng(cfg.seed)
    log = IterateLog(snapshot_every=cfg.snapshot_every)

    ceiling = None
    if cfg.safeguard == "sublevel":
        ceiling = _sublevel_ceiling(rl, p0, cfg.sublevel_factor)

    def acceptable(Xc) -> bool:
        p = Policy.from_matrix(Xc)
        if not is_stabilizing(sys, p):
            return False
        if ceiling is not None and evaluate(rl, p).L_value > ceiling:
            return False
        return True

    diag_norms = [] if cfg.diagnose_stepsize else None
    diag_window = min(1000, cfg.iterations_N)

    query = _CostQuery(rl, rng, cfg.oracle_T, cfg.oracle_burn_in, cfg.divergence_guard, cost_fn)
    antithetic = cfg.estimator == "antithetic"
    best_X = X
    best_L = math.inf
    t0 = time.perf_counter()
    for i in range(cfg.iterations_N):
        try:
            if gradient_oracle is not None:
                est = np.asarray(gradient_oracle(Policy.from_matrix(X)), dtype=float)
                L_hat = math.nan
            else:
                est, L_hat = _gradient_estimate(
                    X, cfg.radius_r, rng, query, cfg.perturbation,
                    cfg.max_perturb_retries, antithetic,
                )
        except DivergenceError as exc:
            raise SearchFailure(
                f"random search stopped at iteration {i}: {exc}",
                policy=Policy.from_matrix(best_X if best_L < math.inf else X),
                log=log,
            ) from exc

        eta_eff = cfg.step_eta
        X_next = X - eta_eff * est
        if cfg.safeguard != "none":
            halvings = 0
            while not acceptable(X_next) and halvings < cfg.max_step_halvings:
                eta_eff *= 0.5
                halvings += 1
                X_next = X - eta_eff * est
            if not acceptable(X_next):
                X_next = X
                eta_eff = 0.0
        X = X_next

        if not math.isnan(L_hat) and L_hat < best_L:
            best_L = L_hat
            best_X = X
        elapsed_ms = (time.perf_counter() - t0) * 1e3
        log.append(i, rl.mu, L_hat, math.nan, math.nan,
                   float(np.linalg.norm(est)), eta_eff, elapsed_ms)
        log.maybe_snapshot(i, Policy.from_matrix(X))

        if diag_norms is not None and i < diag_window:
            diag_norms.append(float(np.linalg.norm(est)))
            if i == diag_window - 1:
                _stepsize_diagnostic(rl, X, cfg, rng, diag_norms, cost_fn)

    final = Policy.from_matrix(X)
    log.force_snapshot(cfg.iterations_N - 1, final)
    return final, log


def _stepsize_diagnostic(rl, X, cfg, rng, norms, cost_fn):
    """Estimate gradient-norm bounds and a curvature scale; warn on oversized steps."""
    norms = np.asarray(norms)
    g_inf = float(norms.max())
    g2 = float(np.mean(norms**2))

    def query(Xc):
        p = Policy.from_matrix(Xc)
        if cost_fn is not None:
            return float(cost_fn(p))
        c = RolloutConfig(horizon_T=cfg.oracle_T, burn_in=cfg.oracle_burn_in,
                          seed=int(rng.integers(0, 2**63)), divergence_guard=cfg.divergence_guard)
        return rollout_cost(rl, p, c).L_hat

    beta = 0.0
    delta = cfg.radius_r
    for _ in range(4):
        v = _draw_direction(rng, X.shape, "sphere")
        try:
            curv = (query(X + delta * v) - 2.0 * query(X) + query(X - delta * v)) / delta**2
        except (DivergenceError, InstabilityError):
            continue
        beta = max(beta, abs(curv))
    if beta > 0 and cfg.step_eta > 1.0 / (2.0 * beta):
        warnings.warn(
            f"step size {cfg.step_eta:g} exceeds curvature heuristic 1/(2*beta_hat)="
            f"{1.0 / (2.0 * beta):g} (G_inf~{g_inf:.3g}, G_2~{g2:.3g})",
            RuntimeWarning,
            stacklevel=3,
        )


def dual_subgradient(rl: RiskLagrangian, p_star: Policy,
                     risk_oracle_cfg: RolloutConfig | None = None) -> float:
    """Constraint slack J_c(p_star) - rho_bar, the ascent direction for mu.

    With a rollout config, J_c is estimated from one seeded trajectory
    (model-free mode); without, it is evaluated exactly.
    """
    if risk_oracle_cfg is None:
        return evaluate(rl, p_star).Jc_value - rl.spec.rho_bar
    return rollout_cost(rl, p_star, risk_oracle_cfg).Jc_hat - rl.spec.rho_bar


def _xi(cfg: PrimalDualConfig, scale: float, j: int) -> float:
    if cfg.step_schedule == "constant":
        return float(cfg.xi_constant)
    return scale * math.sqrt(2.0 / j)


def primal_dual(sys: LinearSystem, noise: NoiseModel, spec: RiskSpec,
                cfg: PrimalDualConfig, p0: Policy) -> tuple[Policy, float, IterateLog]:
    """Alternate inner Lagrangian minimization with projected dual ascent.

    Returns (policy, mu, log). The multiplier trace is nonnegative throughout
    (the update projects onto mu >= 0) and capped at cfg.mu_cap, beyond which
    the run aborts. Exact mode refines the returned pair by bisection; see
    PrimalDualConfig.
    """
    if not is_stabilizing(sys, p0):
        rho = spectral_radius(closed_loop(sys, p0))
        raise InstabilityError(
            f"primal_dual requires a stabilizing initial policy (spectral radius {rho:.6g})"
        )
    exact = cfg.inner == "exact"
    seed_rng = np.random.default_rng(cfg.seed)
    log = IterateLog(snapshot_every=0)  # outer snapshots are forced explicitly below

    mu = float(cfg.mu_init)
    X = p0
    scale = cfg.step_scale
    t0 = time.perf_counter()
    last_valid = (X, mu)
    try:
        for j in range(1, cfg.outer_iters + 1):
            rl = RiskLagrangian(sys, noise, spec, mu)
            if exact:
                X = stationary_point(rl)
                ev = evaluate(rl, X)
                omega = ev.Jc_value - spec.rho_bar
                L_est, J_est, Jc_est = ev.L_value, ev.J_value, ev.Jc_value
            else:
                inner_seed = int(seed_rng.integers(0, 2**63))
                risk_seed = int(seed_rng.integers(0, 2**63))
                inner_cfg = replace(cfg.inner_rs, seed=inner_seed)
                start = X if cfg.warm_start else p0
                X, _ = random_search(rl, start, inner_cfg)
                risk_cfg = RolloutConfig(horizon_T=cfg.risk_oracle_T,
                                         burn_in=cfg.risk_burn_in, seed=risk_seed)
                sample = rollout_cost(rl, X, risk_cfg)
                omega = sample.Jc_hat - spec.rho_bar
                L_est, Jc_est = sample.L_hat, sample.Jc_hat
                J_est = L_est - mu * (Jc_est - spec.rho_bar)
            last_valid = (X, mu)

            if scale is None:
                scale = 0.1 * max(abs(spec.rho_bar), 1.0) / (math.sqrt(2.0) * max(abs(omega), 1e-12))
            xi = _xi(cfg, scale, j)
            elapsed_ms = (time.perf_counter() - t0) * 1e3
            log.append(j, mu, L_est, J_est, Jc_est, abs(omega), xi, elapsed_ms)
            if cfg.snapshot_every > 0 and (j % cfg.snapshot_every == 0 or j == cfg.outer_iters):
                log.force_snapshot(j, X)

            mu = max(0.0, mu + xi * omega)
            if mu >= cfg.mu_cap:
                raise NonConvergenceError(
                    f"multiplier exceeded the overflow guard {cfg.mu_cap:g}",
                    iterations=j,
                )
    except (SearchFailure, DivergenceError) as exc:
        X, mu = last_valid
        raise SearchFailure(
            f"primal_dual inner solver failed: {exc}", policy=X, log=log
        ) from exc

    if exact and cfg.refine:
        mu, X = _refine_exact(sys, noise, spec, mu, cfg)
        ev = evaluate(RiskLagrangian(sys, noise, spec, mu), X)
        omega = ev.Jc_value - spec.rho_bar
        elapsed_ms = (time.perf_counter() - t0) * 1e3
        log.append(cfg.outer_iters + 1, mu, ev.L_value, ev.J_value, ev.Jc_value,
                   abs(omega), 0.0, elapsed_ms)
        log.force_snapshot(cfg.outer_iters + 1, X)
    return X, mu, log


def _refine_exact(sys, noise, spec, mu_hint, cfg: PrimalDualConfig):
    """Drive mu * (J_c(X*(mu)) - rho_bar) to zero by bisection.

    J_c(X*(mu)) is non-increasing in mu, so the slack has at most one sign
    change; diminishing subgradient steps alone cannot reach the 1e-6
    complementary-slackness scale in reasonable time. The bisection aims an
    order of magnitude below the configured tolerance so the returned pair
    clears it with margin.
    """
    tol = 0.05 * cfg.refine_tol * max(1.0, abs(spec.rho_bar))

    def slack(mu):
        rl = RiskLagrangian(sys, noise, spec, mu)
        X = stationary_point(rl)
        return evaluate(rl, X).Jc_value - spec.rho_bar, X

    s0, X0 = slack(0.0)
    if s0 <= 0.0:
        return 0.0, X0

    lo = 0.0
    hi = max(mu_hint, 1.0)
    s_hi, X_hi = slack(hi)
    doublings = 0
    while s_hi > 0.0:
        lo = hi
        hi *= 2.0
        doublings += 1
        if hi > cfg.mu_cap or doublings > 200:
            raise NonConvergenceError(
                "could not bracket the active-constraint multiplier; "
                "is the problem strictly feasible (Slater)?",
                iterations=doublings,
            )
        s_hi, X_hi = slack(hi)

    mu_mid, s_mid, X_mid = hi, s_hi, X_hi
    for _ in range(400):
        if abs(mu_mid * s_mid) <= tol:
            break
        mu_mid = 0.5 * (lo + hi)
        s_mid, X_mid = slack(mu_mid)
        if s_mid > 0.0:
            lo = mu_mid
        else:
            hi = mu_mid
    else:
        raise NonConvergenceError("bisection on the constraint slack did not converge")
    return mu_mid, X_mid
