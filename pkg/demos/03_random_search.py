"""Model-free minimization of the Lagrangian at a fixed multiplier.

A shortened version of the benchmark learning run (30k iterations instead
of 300k): the optimizer only ever sees noisy rollout costs, yet the exact
relative error -- computed here with the model purely for reporting --
drops under a few percent.
"""

import numpy as np

from risklqr import (
    RandomSearchConfig,
    RiskLagrangian,
    dual_value,
    evaluate,
    random_search,
    uav_benchmark,
)

system, noise, spec, p0 = uav_benchmark()
rl = RiskLagrangian(system, noise, spec, 2.0)
D, _ = dual_value(rl)
print(f"target: D(2) = {D:.4f}; starting from L = {evaluate(rl, p0).L_value:.4f} "
      f"(relative error {(evaluate(rl, p0).L_value - D) / abs(D):.1%})")

cfg = RandomSearchConfig(
    iterations_N=30_000,
    radius_r=0.2,
    step_eta=1e-5,
    oracle_T=100,
    seed=0,
    snapshot_every=3_000,
)
final, log = random_search(rl, p0, cfg)

print(f"\n{'iteration':>10} {'L (exact)':>12} {'rel err':>9}")
for it, snapshot in log.snapshots:
    L = evaluate(rl, snapshot).L_value
    print(f"{it + 1:>10} {L:>12.4f} {(L - D) / abs(D):>9.2%}")

print(f"\nfinal gain:\n{np.array_str(final.K, precision=4)}")
print(f"final offset: {np.array_str(final.l, precision=4)}")
print(f"oracle queries: {2 * cfg.iterations_N} rollouts of {cfg.oracle_T} steps")
