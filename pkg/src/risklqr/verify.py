"""Cross-module verification oracles.

Every check compares an implementation path against an independent route to
the same quantity (truncated series vs doubling solver, finite differences
vs the closed-form gradient, value-function identities, duality conditions)
and reports the measured error next to its tolerance. The battery is what
the ``check`` CLI subcommand runs; the acceptance tests reuse it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic import (
    RiskLagrangian,
    advantage_lower_bound,
    average_advantage,
    dual_value,
    evaluate,
    gradient_dominance_certificate,
    lagrangian_stationary_form,
    stationary_point,
)
from .errors import InstabilityError, NumericalError
from .linalg import solve_dare, solve_discrete_lyapunov
from .model import LinearSystem, NoiseModel, RiskSpec
from .optimize import IterateLog, PrimalDualConfig, primal_dual
from .policy import Policy, closed_loop
from .sampling import sample_stabilizing_policies, sample_sublevel_policies

__all__ = [
    "CheckResult",
    "finite_difference_gradient",
    "lyapunov_series",
    "bellman_residual",
    "theorem_style_dual_gap_bounds",
    "run_checks",
]


@dataclass
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        out = f"[{status}] {self.name}: measured {self.measured:.3e} vs tolerance {self.tolerance:.3e}"
        if self.detail:
            out += f"  ({self.detail})"
        return out


def _check(name, measured, tolerance, detail="") -> CheckResult:
    return CheckResult(name=name, measured=float(measured), tolerance=float(tolerance),
                       passed=bool(measured <= tolerance), detail=detail)


def finite_difference_gradient(rl: RiskLagrangian, policy: Policy, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of the exact Lagrangian in each policy entry.

    Entries whose perturbation destabilizes the loop are retried at h/10
    (the Lagrangian is infinite outside the stabilizing set).
    """
    X = policy.as_matrix()
    g = np.empty_like(X)
    for idx in np.ndindex(X.shape):
        step = h
        for _ in range(6):
            Xp = X.copy()
            Xm = X.copy()
            Xp[idx] += step
            Xm[idx] -= step
            try:
                fp = evaluate(rl, Policy.from_matrix(Xp)).L_value
                fm = evaluate(rl, Policy.from_matrix(Xm)).L_value
            except InstabilityError:
                step /= 10.0
                continue
            g[idx] = (fp - fm) / (2.0 * step)
            break
        else:
            raise InstabilityError(f"could not difference entry {idx}: policy at the stability boundary")
    return g


def gradient_fd_error(rl: RiskLagrangian, policy: Policy, h: float = 1e-6) -> float:
    """Worst entrywise relative error between analytic and finite-difference gradients.

    Central differences cannot resolve below eps * |L| / h (cost-evaluation
    round-off divided by the step), so entries under that resolution are
    compared in absolute terms at the noise floor: the returned figure is
    max over entries of |fd - an| / max(|an|, floor/1e-5), which is <= 1e-5
    iff every entry satisfies |fd - an| <= max(1e-5 |an|, floor).
    """
    ev = evaluate(rl, policy)
    an = ev.grad
    fd = finite_difference_gradient(rl, policy, h=h)
    noise_floor = 8.0 * np.finfo(float).eps * max(1.0, abs(ev.L_value)) / h
    denom = np.maximum(np.abs(an), noise_floor / 1e-5)
    return float(np.max(np.abs(fd - an) / denom))


def lyapunov_series(Acl, Wrhs, tail_tol: float = 1e-12, max_terms: int = 500_000) -> np.ndarray:
    """Truncated-series solution sum_k Acl^k Wrhs (Acl')^k, summed term by term.

    Independent of the doubling solver: plain accumulation with the tail
    bounded by the norm of the last term.
    """
    S = np.array(Wrhs, dtype=float)
    term = np.array(Wrhs, dtype=float)
    for _ in range(max_terms):
        term = Acl @ term @ Acl.T
        S += term
        if np.linalg.norm(term, "fro") < tail_tol:
            return S
    raise RuntimeError("series did not reach the tail tolerance")


def bellman_residual(rl: RiskLagrangian, policy: Policy, x) -> float:
    """Residual of V(x) = c(x, u) - L + E_w[V(Acl x + Bl + w)] at one state.

    The expectation over the disturbance is exact (quadratic in w, so only
    wbar and W enter), keeping Monte Carlo noise out of the check.
    """
    ev = evaluate(rl, policy)
    x = np.asarray(x, dtype=float)
    u = policy.apply(x)
    y = closed_loop(rl.sys, policy) @ x + rl.sys.B @ policy.l
    wbar, W = rl.noise.wbar, rl.noise.W
    expected_next = (
        y @ ev.P @ y
        + 2.0 * y @ ev.P @ wbar
        + float(np.trace(ev.P @ W))
        + wbar @ ev.P @ wbar
        + ev.g @ (y + wbar)
    )
    lhs = x @ ev.P @ x + ev.g @ x
    rhs = rl.stage_cost(x, u) - ev.L_value + expected_next
    return float(abs(lhs - rhs))


def theorem_style_dual_gap_bounds(sys, noise, spec, log: IterateLog, D_star: float,
                                  mu_star: float):
    """Post-hoc dual-ascent rate check from an exact-mode iterate log.

    Measures b_hat = max |subgradient| and e_hat = max multiplier magnitude
    over the run (including the optimum), then verifies
    D* - D(mu_bar_j) <= 3 b_hat e_hat / sqrt(j) at every logged j, where
    mu_bar_j is the running average of the multiplier iterates. Returns the
    list of (j, gap, bound).
    """
    mus = log.column("mu")
    omegas = log.column("grad_norm")
    b_hat = float(np.max(np.abs(omegas)))
    e_hat = float(max(np.max(np.abs(mus)), abs(mu_star)))
    out = []
    running = np.cumsum(mus) / np.arange(1, len(mus) + 1)
    for j, mu_bar in enumerate(running, start=1):
        rl = RiskLagrangian(sys, noise, spec, float(max(mu_bar, 0.0)))
        D_j, _ = dual_value(rl)
        gap = D_star - D_j
        bound = 3.0 * b_hat * e_hat / np.sqrt(j)
        out.append((j, float(gap), float(bound)))
    return out


def run_checks(system: LinearSystem, noise: NoiseModel, spec: RiskSpec, policy0: Policy,
               mu: float = 2.0, seed: int = 0, fast: bool = False) -> list[CheckResult]:
    """Run the full invariant battery against one configured instance.

    Covers: structured-solver agreement with series/residual oracles,
    gradient vs finite differences, the two independent Lagrangian closed
    forms, the value-function fixed-point identity, the policy-displacement
    (advantage) identities, risk monotonicity along the multiplier axis,
    the local gradient-dominance inequality, and exact-mode strong duality.
    ``fast`` shrinks sample counts for smoke runs.
    """
    rng = np.random.default_rng(seed)
    rl = RiskLagrangian(system, noise, spec, mu)
    results: list[CheckResult] = []
    n_pol = 10 if fast else 20
    n_states = 20 if fast else 100
    n_pairs = 10 if fast else 50
    n_dom = 10 if fast else 50

    # Structured solvers vs independent oracles.
    Acl0 = closed_loop(system, policy0)
    series = lyapunov_series(Acl0, noise.W)
    doubled = solve_discrete_lyapunov(Acl0, noise.W)
    results.append(_check(
        "lyapunov_vs_truncated_series",
        np.abs(doubled - series).max(),
        1e-8,
        "entrywise, benchmark closed loop",
    ))

    P = solve_dare(system.A, system.B, rl.Qmu, system.R)
    BtP = system.B.T @ P
    K = np.linalg.solve(system.R + BtP @ system.B, BtP @ system.A)
    dare_res = np.linalg.norm(
        P - (rl.Qmu + system.A.T @ P @ system.A - (system.A.T @ P @ system.B) @ K), "fro"
    ) / max(1.0, np.linalg.norm(P, "fro"))
    results.append(_check("dare_relative_residual", dare_res, 1e-9))

    # Gradient vs central finite differences on random stabilizing policies.
    policies = sample_stabilizing_policies(system, n_pol, rng, around=policy0)
    fd_err = max(gradient_fd_error(rl, p) for p in policies[: max(3, n_pol // 3)])
    results.append(_check("gradient_vs_finite_differences", fd_err, 1e-5,
                          "entrywise relative, h=1e-6"))

    # Two independent closed forms of L, and the J/Jc decomposition.
    form_err = 0.0
    decomp_err = 0.0
    for p in policies:
        ev = evaluate(rl, p)
        scale = max(1.0, abs(ev.L_value))
        form_err = max(form_err, abs(ev.L_value - lagrangian_stationary_form(rl, p)) / scale)
        decomp_err = max(
            decomp_err,
            abs(ev.L_value - (ev.J_value + mu * (ev.Jc_value - spec.rho_bar))) / scale,
        )
    results.append(_check("lagrangian_two_closed_forms", form_err, 1e-9, "relative"))
    results.append(_check("lagrangian_equals_J_plus_mu_slack", decomp_err, 1e-9, "relative"))

    # Value-function fixed-point identity at random states.
    states = rng.standard_normal((n_states, system.n)) * 5.0
    bell = max(bellman_residual(rl, policy0, x) for x in states)
    results.append(_check("value_function_fixed_point_residual", bell, 1e-8,
                          f"{n_states} random states"))

    # Policy-displacement identity: stationary-average advantage equals the
    # Lagrangian difference; and it respects the completion-of-squares floor.
    pair_err = 0.0
    floor_violation = 0.0
    for _ in range(n_pairs):
        base, probe = sample_stabilizing_policies(system, 2, rng, around=policy0)
        diff = evaluate(rl, probe).L_value - evaluate(rl, base).L_value
        avg = average_advantage(rl, base, probe)
        pair_err = max(pair_err, abs(diff - avg) / max(1.0, abs(diff)))
        floor_violation = max(
            floor_violation, advantage_lower_bound(rl, base, probe) - avg
        )
    results.append(_check("advantage_cost_difference_identity", pair_err, 1e-7,
                          f"{n_pairs} policy pairs, relative"))
    results.append(_check("advantage_completion_of_squares_floor", floor_violation, 1e-8,
                          "average advantage above its floor"))

    # Risk value at the stationary policy is non-increasing along mu.
    grid = np.arange(0.0, 10.0 + 1e-9, 0.5)
    jc_vals = []
    for g in grid:
        rl_g = rl.with_mu(float(g))
        jc_vals.append(evaluate(rl_g, stationary_point(rl_g)).Jc_value)
    worst_rise = max(
        jc_vals[i + 1] - jc_vals[i] for i in range(len(jc_vals) - 1)
    )
    results.append(_check("risk_of_stationary_policy_nonincreasing_in_mu",
                          worst_rise, 1e-8, "grid 0:0.5:10"))

    # Local gradient dominance over a sampled sublevel set.
    L0 = evaluate(rl, policy0).L_value
    D_mu, _ = dual_value(rl)
    ceiling = D_mu + max(10.0 * (L0 - D_mu), 1.0)
    dom_policies = sample_sublevel_policies(rl, n_dom, rng, ceiling, around=policy0)
    try:
        gradient_dominance_certificate(rl, dom_policies, check=True)
        dom_violation = 0.0
    except NumericalError:
        dom_violation = 1.0
    results.append(_check("local_gradient_dominance_inequality", dom_violation, 0.5,
                          f"{n_dom} sublevel policies"))

    # Exact-mode strong duality and complementary slackness.
    pd_cfg = PrimalDualConfig(outer_iters=5, inner="exact", seed=seed)
    X_star, mu_star, _ = primal_dual(system, noise, spec, pd_cfg, policy0)
    rl_star = RiskLagrangian(system, noise, spec, mu_star)
    ev_star = evaluate(rl_star, X_star)
    D_star, _ = dual_value(rl_star)
    slack = abs(mu_star * (ev_star.Jc_value - spec.rho_bar)) / max(1.0, abs(spec.rho_bar))
    gap = abs(ev_star.J_value - D_star) / max(1e-12, abs(D_star))
    results.append(_check("complementary_slackness", slack, 1e-6, f"mu*={mu_star:.6g}"))
    results.append(_check("strong_duality_relative_gap", gap, 1e-6))
    feas = ev_star.Jc_value - spec.rho_bar if mu_star == 0.0 else 0.0
    results.append(_check("primal_feasibility_at_solution", max(feas, 0.0), 1e-9,
                          "J_c <= rho_bar when constraint inactive"))

    return results
