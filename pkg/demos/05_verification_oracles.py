"""Tour of the verification oracles that guard the closed forms.

Every core formula in the library is checked against an independent route
to the same quantity. This script runs the battery on the benchmark and
then unpacks two of the identities by hand so the mechanics are visible.
"""

import numpy as np

from risklqr import (
    Policy,
    RiskLagrangian,
    average_advantage,
    evaluate,
    uav_benchmark,
    value_function,
)
from risklqr.verify import bellman_residual, finite_difference_gradient, run_checks

system, noise, spec, p0 = uav_benchmark()
rl = RiskLagrangian(system, noise, spec, 2.0)

print("full battery:")
for result in run_checks(system, noise, spec, p0, mu=2.0, seed=0):
    print(" ", result.line())

# 1. The gradient formula against central finite differences, by hand.
fd = finite_difference_gradient(rl, p0)
an = evaluate(rl, p0).grad
print("\nanalytic gradient row 0:", np.array_str(an[0], precision=4))
print("finite differences row 0:", np.array_str(fd[0], precision=4))
print(f"worst absolute deviation: {np.abs(fd - an).max():.2e}")

# 2. The policy-displacement identity: switching costs decompose through the
#    advantage, so its stationary average must equal the Lagrangian gap.
probe = Policy(K=p0.K + 0.05, l=p0.l + np.array([0.2, -0.1]))
gap = evaluate(rl, probe).L_value - evaluate(rl, p0).L_value
avg = average_advantage(rl, p0, probe)
print(f"\nL(probe) - L(base) = {gap:.6f}")
print(f"average advantage  = {avg:.6f}   (difference {abs(gap - avg):.2e})")

# 3. The relative value function satisfies its one-step fixed-point identity
#    at any state; z is pinned to zero so V(0) = 0.
x = np.array([1.0, -0.5, 2.0, 0.0])
print(f"\nV(x) = {value_function(rl, p0, x):.6f}, "
      f"fixed-point residual = {bellman_residual(rl, p0, x):.2e}")
