"""Seeded trajectory rollouts producing noisy cost estimates.

The oracle simulates x' = Ax + Bu + w under u = -Kx + l and time-averages
the reshaped stage cost and the risk stage cost over a finite horizon. It is
the only interface the model-free optimizers are allowed to query; given the
same (policy, config) it is bit-reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError
from .linalg import as_vector
from .policy import Policy, closed_loop

__all__ = ["RolloutConfig", "OracleSample", "rollout_cost"]

# Trajectories are generated in fixed-size blocks so that noise draws do not
# depend on how the horizon splits; part of the determinism contract.
_BLOCK = 1 << 16


@dataclass(frozen=True)
class RolloutConfig:
    """Horizon, burn-in, initial state, and seed of one simulated rollout.

    burn_in steps are simulated but excluded from the averages (default 0:
    the averages start at t = 0). x0 defaults to the origin. States whose
    norm exceeds divergence_guard abort the rollout with a typed error.
    """

    horizon_T: int
    burn_in: int = 0
    x0: np.ndarray | None = None
    seed: int = 0
    divergence_guard: float = 1e9

    def __post_init__(self):
        if self.horizon_T < 1:
            raise ConfigError(f"horizon_T must be >= 1, got {self.horizon_T}")
        if self.burn_in < 0:
            raise ConfigError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.divergence_guard <= 0:
            raise ConfigError("divergence_guard must be positive")


@dataclass(frozen=True)
class OracleSample:
    """Time-averaged noisy costs measured on one trajectory."""

    L_hat: float
    Jc_hat: float
    trajectory_len: int


# The linear recursion is advanced _UNROLL steps at a time: the base states
# x_{sk} follow a recursion in Acl^s whose inputs are the noise convolved
# with the first s-1 powers of Acl (all vectorized), and intermediate states
# are reconstructed level by level. Cuts the per-step interpreter overhead
# by roughly the unroll factor; the grouping is fixed, so results stay
# deterministic.
_UNROLL = 8


def _simulate_block(Acl, powers, x, w):
    """States x_0..x_{B-1} of x_{t+1} = Acl x_t + w_t from x_0 = x.

    `w` must already include any constant drift. Returns (states, x_B).
    Overflow to inf/nan is tolerated here; the caller's divergence guard
    reports the first offending step.
    """
    B, n = w.shape
    s = _UNROLL
    if B < 2 * s:
        traj = np.empty((B, n))
        tmp = np.empty(n)
        x = x.copy()
        for i in range(B):
            traj[i] = x
            np.matmul(Acl, x, out=tmp)
            np.add(tmp, w[i], out=x)
        return traj, x
    groups = -(-B // s)
    padded = np.zeros((groups * s, n))
    padded[:B] = w
    w_grouped = padded.reshape(groups, s, n)
    d = w_grouped[:, s - 1].copy()
    for j in range(s - 1):
        d += w_grouped[:, j] @ powers[s - 1 - j].T
    A_s = powers[s]
    base = np.empty((groups, n))
    y = x.copy()
    tmp = np.empty(n)
    for k in range(groups):
        base[k] = y
        np.matmul(A_s, y, out=tmp)
        np.add(tmp, d[k], out=y)
    levels = np.empty((groups, s, n))
    levels[:, 0] = base
    for j in range(1, s):
        levels[:, j] = levels[:, j - 1] @ Acl.T + w_grouped[:, j - 1]
    traj = levels.reshape(groups * s, n)[:B]
    x_next = Acl @ traj[B - 1] + w[B - 1]
    return traj, x_next


def rollout_cost(rl, policy: Policy, cfg: RolloutConfig, dump_path=None) -> OracleSample:
    """Simulate one closed-loop trajectory and time-average its costs.

    L_hat averages x'Qmu x + 2 x'S + u'Ru - mu*rho_bar and Jc_hat averages
    4 x'QWQ x + 4 x'Q M3 over the horizon (after burn-in). Deterministic
    given cfg.seed. With dump_path set, writes the trajectory (t, state,
    input, stage cost) as CSV.

    Raises DivergenceError, identifying the offending step, as soon as the
    state norm crosses the guard: the signal a destabilized policy sends to
    the optimizer safeguards.
    """
    sys = rl.sys
    noise = rl.noise
    n = sys.n
    Acl = closed_loop(sys, policy)
    K, l = policy.K, policy.l
    Bl = sys.B @ l

    Qmu, S, R = rl.Qmu, rl.S, sys.R
    mu_rho = rl.mu * rl.spec.rho_bar
    QWQ = rl.QWQ
    qm3 = rl.QM3_4

    x = np.zeros(n) if cfg.x0 is None else as_vector(cfg.x0, dim=n, name="x0").copy()
    total = cfg.burn_in + cfg.horizon_T
    guard_sq = cfg.divergence_guard**2
    rng = np.random.default_rng(cfg.seed)

    L_sum = 0.0
    Jc_sum = 0.0
    done = 0
    writer = ctx = None
    if dump_path is not None:
        ctx = open(dump_path, "w", newline="")
        ctx.write("# schema: risklqr-trajectory v1\n")
        writer = csv.writer(ctx)
        writer.writerow(
            ["t"] + [f"x{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(sys.m)] + ["cost"]
        )

    powers = [np.eye(n)]
    for _ in range(_UNROLL):
        powers.append(powers[-1] @ Acl)

    try:
        while done < total:
            block = min(_BLOCK, total - done)
            w = noise.sample(rng, block)
            w += Bl
            with np.errstate(over="ignore", invalid="ignore"):
                traj, x = _simulate_block(Acl, powers, x, w)
                norms = np.einsum("ti,ti->t", traj, traj)
            bad = ~(norms <= guard_sq)
            if bad.any():
                step = done + int(np.argmax(bad))
                raise DivergenceError(
                    f"state norm exceeded divergence guard {cfg.divergence_guard:g} at step {step}",
                    step=step,
                )

            u = traj @ (-K.T) + l
            stage = (
                np.einsum("ti,ij,tj->t", traj, Qmu, traj)
                + 2.0 * traj @ S
                + np.einsum("ti,ij,tj->t", u, R, u)
                - mu_rho
            )
            lo = max(cfg.burn_in - done, 0)
            if lo < block:
                L_sum += float(stage[lo:].sum())
                Jc_sum += float(
                    (np.einsum("ti,ij,tj->t", traj[lo:], QWQ, traj[lo:]) * 4.0).sum()
                    + (traj[lo:] @ qm3).sum()
                )
            if writer is not None:
                for i in range(block):
                    writer.writerow(
                        [done + i] + list(traj[i]) + list(u[i]) + [float(stage[i])]
                    )
            done += block
    finally:
        if ctx is not None:
            ctx.close()

    T = float(cfg.horizon_T)
    return OracleSample(
        L_hat=L_sum / T, Jc_hat=Jc_sum / T, trajectory_len=int(cfg.horizon_T)
    )
