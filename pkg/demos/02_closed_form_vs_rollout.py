"""Cross-check the closed-form Lagrangian against seeded rollouts.

The exact evaluation (Riccati/Lyapunov solves) and the trajectory oracle are
two fully independent routes to the same number; watching the Monte Carlo
estimate tighten as the horizon grows is the quickest way to convince
yourself both are right.
"""

import numpy as np

from risklqr import RiskLagrangian, RolloutConfig, evaluate, rollout_cost, uav_benchmark

system, noise, spec, p0 = uav_benchmark()
rl = RiskLagrangian(system, noise, spec, 2.0)
ev = evaluate(rl, p0)
print(f"closed form at the initial policy: L = {ev.L_value:.4f}, "
      f"J = {ev.J_value:.4f}, J_c = {ev.Jc_value:.4f}")

print(f"\n{'horizon':>10} {'L_hat':>12} {'rel err':>10}   (median over 5 seeds)")
for T in (1_000, 10_000, 100_000, 1_000_000):
    estimates = [
        rollout_cost(rl, p0, RolloutConfig(horizon_T=T, seed=s)).L_hat for s in range(5)
    ]
    med = float(np.median(estimates))
    print(f"{T:>10} {med:>12.4f} {abs(med - ev.L_value) / abs(ev.L_value):>10.2%}")

print("\nsame horizons for the risk cost J_c:")
for T in (1_000, 10_000, 100_000, 1_000_000):
    estimates = [
        rollout_cost(rl, p0, RolloutConfig(horizon_T=T, seed=s)).Jc_hat for s in range(5)
    ]
    med = float(np.median(estimates))
    print(f"{T:>10} {med:>12.4f} {abs(med - ev.Jc_value) / abs(ev.Jc_value):>10.2%}")
