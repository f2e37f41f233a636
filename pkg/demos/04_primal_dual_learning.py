"""Full model-free primal-dual run at demo scale.

Alternates warm-started random search (inner, fixed multiplier) with
projected subgradient ascent on the multiplier, using only rollout data.
Budgets here are a quarter of the benchmark experiment so the run finishes
in about a minute; expect the final gaps a little above what the full-size
run reaches.
"""

from risklqr import (
    PrimalDualConfig,
    RandomSearchConfig,
    RiskLagrangian,
    evaluate,
    primal_dual,
    uav_benchmark,
)

system, noise, spec, p0 = uav_benchmark()

exact = PrimalDualConfig(outer_iters=20, inner="exact", seed=0)
X_star, mu_star, _ = primal_dual(system, noise, spec, exact, p0)
rl0 = RiskLagrangian(system, noise, spec, 0.0)
J_star = evaluate(rl0, X_star).J_value
print(f"exact reference: mu* = {mu_star:.4f}, J* = {J_star:.4f}, rho_bar = {spec.rho_bar:.4f}")

cfg = PrimalDualConfig(
    outer_iters=15,
    inner="random_search",
    inner_rs=RandomSearchConfig(iterations_N=2_000, seed=0),
    risk_oracle_T=10_000,
    step_scale=0.08,
    seed=1,
)
policy, mu, log = primal_dual(system, noise, spec, cfg, p0)

print(f"\n{'outer':>6} {'mu':>8} {'Jc_hat':>9} {'J (exact eval)':>15} {'opt gap':>9}")
for (it, snap), mu_j, jc_hat in zip(log.snapshots, log.column("mu"), log.column("Jc_est")):
    ev = evaluate(rl0, snap)
    print(f"{it:>6} {mu_j:>8.3f} {jc_hat:>9.3f} {ev.J_value:>15.4f} "
          f"{abs(ev.J_value - J_star) / J_star:>9.2%}")

ev = evaluate(rl0, policy)
print(f"\nfinal: mu = {mu:.4f}  optimality gap {abs(ev.J_value - J_star) / J_star:.2%}  "
      f"constraint violation {abs(ev.Jc_value - spec.rho_bar) / spec.rho_bar:.2%}")
