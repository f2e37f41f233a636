"""Exact model-based evaluation of the risk Lagrangian.

For a stabilizing affine policy (K, l) under multiplier mu, everything is
built from five stationary objects:

    P     quadratic coefficient of the relative value function, solving
          P = Qmu + K'RK + (A-BK)' P (A-BK)
    Sigma stationary state covariance, solving Sigma = W + (A-BK) Sigma (A-BK)'
    xbar  stationary state mean, xbar = (A-BK) xbar + Bl + wbar
    g     linear coefficient of the relative value function
    Phi   stationary correlation matrix of the augmented vector (x, -1),
          positive definite whenever the policy is stabilizing

with Qmu = Q + 4 mu Q W Q and S = 2 mu Q M3 the risk-reshaped weights. The
Lagrangian value L = J + mu (J_c - rho_bar) has two independent closed forms
(a value-function form and a stationary-distribution form); both are
implemented and cross-checked in the test suite. Its gradient in the
augmented variable X = [K l] is 2 [E G] Phi, which vanishes exactly at the
unique stationary policy computed by :func:`stationary_point`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InstabilityError, NumericalError
from .linalg import (
    as_vector,
    riccati_gain,
    solve_dare,
    solve_discrete_lyapunov,
    spectral_radius,
    symmetrize,
)
from .model import LinearSystem, NoiseModel, RiskSpec
from .policy import Policy, closed_loop

__all__ = [
    "RiskLagrangian",
    "PolicyEvaluation",
    "evaluate",
    "lagrangian_stationary_form",
    "gradient",
    "stationary_point",
    "dual_value",
    "value_function",
    "advantage",
    "average_advantage",
    "advantage_lower_bound",
    "gradient_dominance_certificate",
]


@dataclass(frozen=True)
class RiskLagrangian:
    """Bundle (system, noise, risk spec, multiplier) with the reshaped weights.

    Immutable; use :meth:`with_mu` to move along the dual variable. Qmu and S
    are recomputed on construction so they can never go stale.
    """

    sys: LinearSystem
    noise: NoiseModel
    spec: RiskSpec
    mu: float

    def __post_init__(self):
        if self.mu < 0 or not np.isfinite(self.mu):
            raise ConfigError(f"multiplier mu must be a nonnegative real, got {self.mu}")
        if self.noise.dim != self.sys.n:
            raise ConfigError("noise dimension does not match the system state dimension")
        Q, W = self.sys.Q, self.noise.W
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "Qmu", symmetrize(Q + 4.0 * self.mu * Q @ W @ Q))
        object.__setattr__(self, "S", 2.0 * self.mu * Q @ self.noise.M3)
        # Stage-cost kernels reused by every rollout of this bundle.
        object.__setattr__(self, "QWQ", symmetrize(Q @ W @ Q))
        object.__setattr__(self, "QM3_4", 4.0 * Q @ self.noise.M3)

    def with_mu(self, mu: float) -> "RiskLagrangian":
        return RiskLagrangian(self.sys, self.noise, self.spec, float(mu))

    def stage_cost(self, x, u) -> float:
        """Reshaped per-step cost x'Qmu x + 2 x'S + u'Ru - mu rho_bar."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return float(
            x @ self.Qmu @ x + 2.0 * x @ self.S + u @ self.sys.R @ u - self.mu * self.spec.rho_bar
        )


@dataclass(frozen=True)
class PolicyEvaluation:
    """All stationary quantities of one (policy, multiplier) pair."""

    P: np.ndarray
    Sigma: np.ndarray
    xbar: np.ndarray
    g: np.ndarray
    E: np.ndarray
    G: np.ndarray
    Phi: np.ndarray
    Vmat: np.ndarray
    L_value: float
    J_value: float
    Jc_value: float
    grad: np.ndarray


def evaluate(rl: RiskLagrangian, policy: Policy) -> PolicyEvaluation:
    """Exact evaluation of L, J, J_c and the gradient for a stabilizing policy."""
    sys = rl.sys
    A, B, Q, R = sys.A, sys.B, sys.Q, sys.R
    noise = rl.noise
    K, l = policy.K, policy.l

    Acl = closed_loop(sys, policy)
    rho = spectral_radius(Acl)
    if rho >= 1.0:
        raise InstabilityError(
            f"policy is not stabilizing (spectral radius {rho:.9g}); the Lagrangian is infinite"
        )

    P = solve_discrete_lyapunov(Acl.T, rl.Qmu + K.T @ R @ K)
    Sigma = solve_discrete_lyapunov(Acl, noise.W)
    n = sys.n
    Vmat = np.linalg.inv(np.eye(n) - Acl)

    BtP = B.T @ P
    gram = R + BtP @ B
    E = gram @ K - BtP @ A

    drift = B @ l + noise.wbar
    xbar = Vmat @ drift
    g = 2.0 * Vmat.T @ (rl.S - E.T @ l + Acl.T @ (P @ noise.wbar))
    G = gram @ l + BtP @ noise.wbar + 0.5 * B.T @ g

    second_moment = Sigma + np.outer(xbar, xbar)
    Phi = np.empty((n + 1, n + 1))
    Phi[:n, :n] = second_moment
    Phi[:n, n] = -xbar
    Phi[n, :n] = -xbar
    Phi[n, n] = 1.0

    L_value = float(
        np.trace(P @ (noise.W + np.outer(drift, drift)))
        + g @ drift
        + l @ R @ l
        - rl.mu * rl.spec.rho_bar
    )
    Rl = R @ l
    J_value = float(
        np.trace((Q + K.T @ R @ K) @ second_moment) - 2.0 * Rl @ K @ xbar + l @ Rl
    )
    Jc_value = float(4.0 * np.trace(rl.QWQ @ second_moment) + 4.0 * xbar @ Q @ noise.M3)

    grad = 2.0 * np.hstack([E, G[:, None]]) @ Phi

    return PolicyEvaluation(
        P=P,
        Sigma=Sigma,
        xbar=xbar,
        g=g,
        E=E,
        G=G,
        Phi=Phi,
        Vmat=Vmat,
        L_value=L_value,
        J_value=J_value,
        Jc_value=Jc_value,
        grad=grad,
    )


def lagrangian_stationary_form(rl: RiskLagrangian, policy: Policy) -> float:
    """Second closed form of L, averaging the stage cost over the stationary law.

    Independent of the value-function form computed by :func:`evaluate`
    (it never touches P or g); kept as a cross-checking oracle.
    """
    ev = evaluate(rl, policy)
    K, l = policy.K, policy.l
    R = rl.sys.R
    QK = rl.Qmu + K.T @ R @ K
    second_moment = ev.Sigma + np.outer(ev.xbar, ev.xbar)
    return float(
        np.trace(QK @ second_moment)
        + (2.0 * rl.S - 2.0 * K.T @ R @ l) @ ev.xbar
        + l @ R @ l
        - rl.mu * rl.spec.rho_bar
    )


def gradient(rl: RiskLagrangian, policy: Policy) -> np.ndarray:
    """Gradient of L in the augmented variable [K l]; shape (m, n+1)."""
    return evaluate(rl, policy).grad


def stationary_point(rl: RiskLagrangian) -> Policy:
    """The unique policy at which the gradient vanishes, via the Riccati solution."""
    sys = rl.sys
    A, B, R = sys.A, sys.B, sys.R
    P = solve_dare(A, B, rl.Qmu, R)
    K = riccati_gain(A, B, P, R)
    Vmat = np.linalg.inv(np.eye(sys.n) - (A - B @ K))
    gram = R + B.T @ P @ B
    l = -np.linalg.solve(gram, B.T @ (Vmat.T @ (P @ rl.noise.wbar + rl.S)))
    return Policy(K=K, l=l)


def dual_value(rl: RiskLagrangian) -> tuple[float, Policy]:
    """D(mu) = min over stabilizing policies of L, and its minimizer."""
    best = stationary_point(rl)
    return evaluate(rl, best).L_value, best


def value_function(rl: RiskLagrangian, policy: Policy, x) -> float:
    """Relative value x'Px + g'x (additive constant pinned to zero).

    Satisfies the average-cost fixed-point identity
    V(x) = c(x, u) - L + E_w[V((A-BK)x + Bl + w)] for every state x.
    """
    ev = evaluate(rl, policy)
    x = as_vector(x, dim=rl.sys.n, name="x")
    return float(x @ ev.P @ x + ev.g @ x)


def _displacement_quadratic(rl, base_ev, base: Policy, probe: Policy):
    """Coefficients (Mq, b, c) of the policy-displacement quadratic in x.

    The relative gain of switching from `base` to `probe` for one step at
    state x is x'Mq x + b'x + c; all three depend on base's stationary
    objects and the displacement (dK, dl) only.
    """
    R, B = rl.sys.R, rl.sys.B
    dK = probe.K - base.K
    dl = probe.l - base.l
    gram = R + B.T @ base_ev.P @ B
    Mq = 2.0 * dK.T @ base_ev.E + dK.T @ gram @ dK
    b = -2.0 * (dK.T @ base_ev.G + dK.T @ gram @ dl + base_ev.E.T @ dl)
    c = float(2.0 * dl @ base_ev.G + dl @ gram @ dl)
    return Mq, b, c


def advantage(rl: RiskLagrangian, base: Policy, probe: Policy, x) -> float:
    """One-step relative cost of playing `probe`'s action at x against `base`'s value.

    Its stationary average under `probe` equals L(probe) - L(base); when
    base is the stationary policy that average is nonnegative for every
    probe (no switch improves), which is the completion-of-squares argument
    behind the gradient-dominance certificate.
    """
    ev = evaluate(rl, base)
    x = as_vector(x, dim=rl.sys.n, name="x")
    Mq, b, c = _displacement_quadratic(rl, ev, base, probe)
    return float(x @ Mq @ x + b @ x + c)


def average_advantage(rl: RiskLagrangian, base: Policy, probe: Policy) -> float:
    """Stationary average of :func:`advantage` under `probe`'s state distribution.

    Equals L(probe) - L(base); the quadratic is averaged in closed form
    against probe's stationary second moment, not sampled.
    """
    base_ev = evaluate(rl, base)
    probe_ev = evaluate(rl, probe)
    Mq, b, c = _displacement_quadratic(rl, base_ev, base, probe)
    second_moment = probe_ev.Sigma + np.outer(probe_ev.xbar, probe_ev.xbar)
    return float(np.trace(Mq @ second_moment) + b @ probe_ev.xbar + c)


def advantage_lower_bound(rl: RiskLagrangian, base: Policy, probe: Policy) -> float:
    """Completion-of-squares floor -tr{Phi_probe [E G]'(R + B'PB)^-1 [E G]}.

    The stationary-average advantage can never fall below this value, which
    is what makes a vanishing gradient certify global optimality.
    """
    base_ev = evaluate(rl, base)
    probe_ev = evaluate(rl, probe)
    B, R = rl.sys.B, rl.sys.R
    EG = np.hstack([base_ev.E, base_ev.G[:, None]])
    gram = R + B.T @ base_ev.P @ B
    return float(-np.trace(probe_ev.Phi @ EG.T @ np.linalg.solve(gram, EG)))


def gradient_dominance_certificate(
    rl: RiskLagrangian, policies, check: bool = True, tol: float = 1e-8
) -> float:
    """Local gradient-dominance constant valid on the listed policies.

    Returns lam = ||Phi*||_2 / (4 sigma_min(R) phi^2) where Phi* is the
    stationary policy's correlation matrix and phi the smallest
    sigma_min(Phi) over the list. With ``check`` set, verifies
    L(X) - D(mu) <= lam * tr(grad' grad) for every listed policy and raises
    if any violates it beyond ``tol``.
    """
    policies = list(policies)
    if not policies:
        raise ConfigError("gradient_dominance_certificate needs at least one policy")
    dual, star = dual_value(rl)
    phi_star_norm = float(np.linalg.eigvalsh(evaluate(rl, star).Phi)[-1])
    sigma_min_R = float(np.linalg.eigvalsh(rl.sys.R)[0])

    evals = [evaluate(rl, p) for p in policies]
    phi_hat = min(float(np.linalg.eigvalsh(ev.Phi)[0]) for ev in evals)
    if phi_hat <= 0:
        raise NumericalError("correlation matrix lost positive definiteness")
    lam = phi_star_norm / (4.0 * sigma_min_R * phi_hat**2)

    if check:
        for p, ev in zip(policies, evals):
            gap = ev.L_value - dual
            bound = lam * float(np.sum(ev.grad * ev.grad))
            if gap > bound + tol * max(1.0, abs(dual)):
                raise NumericalError(
                    f"gradient dominance violated: gap {gap:.6e} > bound {bound:.6e}"
                )
    return lam
