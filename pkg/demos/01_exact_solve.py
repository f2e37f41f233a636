"""Solve the benchmark risk-constrained LQR exactly and inspect the optimum.

The model-based path needs no learning: for each multiplier the inner
minimizer is a Riccati solve, and the dual variable is driven to the
active-constraint value. The printout shows complementary slackness and the
vanishing duality gap that make the primal-dual approach sound.
"""

import numpy as np

from risklqr import (
    PrimalDualConfig,
    RiskLagrangian,
    dual_value,
    evaluate,
    primal_dual,
    uav_benchmark,
)

system, noise, spec, p0 = uav_benchmark()
print(f"risk budget: rho = {spec.rho}  ->  rho_bar = {spec.rho_bar:.4f}")

rl0 = RiskLagrangian(system, noise, spec, 0.0)
unconstrained = evaluate(rl0, dual_value(rl0)[1])
print(f"risk-neutral optimum: J = {unconstrained.J_value:.3f}, "
      f"J_c = {unconstrained.Jc_value:.3f}  (budget violated: "
      f"{unconstrained.Jc_value > spec.rho_bar})")

policy, mu_star, log = primal_dual(
    system, noise, spec, PrimalDualConfig(outer_iters=25, inner="exact"), p0
)
rl = RiskLagrangian(system, noise, spec, mu_star)
ev = evaluate(rl, policy)
D_star, _ = dual_value(rl)

print(f"\noptimal multiplier mu* = {mu_star:.6f}")
print(f"optimal gain K*:\n{np.array_str(policy.K, precision=4)}")
print(f"optimal offset l* = {np.array_str(policy.l, precision=4)}")
print(f"J(X*) = {ev.J_value:.4f}   J_c(X*) = {ev.Jc_value:.4f}  (budget {spec.rho_bar:.4f})")
print(f"duality gap |J - D|/|D| = {abs(ev.J_value - D_star) / abs(D_star):.2e}")
print(f"complementary slackness mu*(J_c - rho_bar) = "
      f"{mu_star * (ev.Jc_value - spec.rho_bar):.2e}")
print(f"\nprice of risk aversion: J rises from {unconstrained.J_value:.2f} to "
      f"{ev.J_value:.2f} while J_c falls from {unconstrained.Jc_value:.2f} to "
      f"{ev.Jc_value:.2f}")
