"""Command-line interface: verification, exact solves, and learning experiments.

Subcommands
-----------
check        run the cross-module verification battery (no optimizer runs)
solve-exact  model-based primal-dual solve; reports the optimal gain pair,
             multiplier, duality gap and complementary slackness residual
learn        per-seed random search at fixed multiplier; per-seed CSV logs
             plus an aggregate of the relative Lagrangian error
primal-dual  per-seed primal-dual runs (exact or model-free inner solver)
             with aggregate optimality-gap / constraint-violation curves
simulate     one seeded rollout with a full trajectory dump

Exit codes: 0 success, 1 assertion failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analytic import RiskLagrangian, dual_value, evaluate
from .config import (
    ExperimentConfig,
    config_to_tables,
    emit_toml,
    load_config,
    parse_config,
    policy_to_table,
)
from .errors import ConfigError, RiskLqrError
from .model import uav_benchmark
from .optimize import PrimalDualConfig, primal_dual, random_search
from .oracle import RolloutConfig, rollout_cost
from .verify import run_checks

__all__ = ["main"]


def _uav_tables() -> dict:
    """Literal config tables of the built-in benchmark (used when --config is absent)."""
    system, _, _, policy = uav_benchmark()
    return {
        "system": {
            "A": system.A.tolist(),
            "B": system.B.tolist(),
            "Q": system.Q.tolist(),
            "R": system.R.tolist(),
        },
        "noise": {
            "kind": "gaussian_mixture",
            "enters_via_B": True,
            "weights": [0.2, 0.8],
            "means": [[3.0, 0.0], [8.0, 0.0]],
            "covs": [[[30.0, 0.0], [0.0, 0.01]], [[60.0, 0.0], [0.0, 0.01]]],
        },
        "risk": {"rho": 15.0},
        "policy": policy_to_table(policy),
        "run": {"seeds": [0], "workers": 1, "out": "out", "mode": "model-free", "mu": 2.0},
        "random_search": {"iterations": 300_000, "radius": 0.2, "step": 1e-5,
                          "oracle_T": 100, "snapshot_every": 3000},
        "primal_dual": {"outer_iters": 40, "inner": "random_search",
                        "risk_oracle_T": 10_000},
    }


def _load(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = parse_config(_uav_tables())
    if args.seeds is not None:
        text = args.seeds
        if "," in text:
            cfg.seeds = [int(s) for s in text.split(",") if s.strip() != ""]
        else:
            cfg.seeds = list(range(int(text)))
    if args.out is not None:
        cfg.out_dir = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "exact", False):
        cfg.mode = "exact"
    if getattr(args, "model_free", False):
        cfg.mode = "model-free"
    return cfg


def _prepare_out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.toml").write_text(emit_toml(config_to_tables(cfg)))
    return out


def _write_long_csv(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write("# schema: risklqr-aggregate-long v1\n")
        fh.write("series,iteration,value\n")
        for series, iteration, value in rows:
            fh.write(f"{series},{iteration},{repr(float(value))}\n")


def _aggregate_rows(prefix, iterations, per_seed_values):
    """Long-format median/IQR and mean/stddev rows across seeds per iteration."""
    data = np.asarray(per_seed_values, dtype=float)  # (seeds, iterations)
    rows = []
    for j, it in enumerate(iterations):
        col = data[:, j]
        rows += [
            (f"{prefix}_median", it, np.median(col)),
            (f"{prefix}_q25", it, np.quantile(col, 0.25)),
            (f"{prefix}_q75", it, np.quantile(col, 0.75)),
            (f"{prefix}_mean", it, np.mean(col)),
            (f"{prefix}_std", it, np.std(col)),
        ]
    return rows


def cmd_check(args) -> int:
    cfg = _load(args)
    out = _prepare_out(cfg)
    results = run_checks(cfg.system, cfg.noise, cfg.spec, cfg.policy,
                         mu=cfg.mu, seed=cfg.seeds[0], fast=args.fast)
    report_lines = [r.line() for r in results]
    (out / "check_report.txt").write_text("\n".join(report_lines) + "\n")
    for line in report_lines:
        print(line)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 1


def cmd_solve_exact(args) -> int:
    cfg = _load(args)
    out = _prepare_out(cfg)
    pd_cfg = cfg.primal_dual or PrimalDualConfig()
    pd_cfg = replace(pd_cfg, inner="exact", inner_rs=None)
    policy, mu_star, log = primal_dual(cfg.system, cfg.noise, cfg.spec, pd_cfg, cfg.policy)
    rl = RiskLagrangian(cfg.system, cfg.noise, cfg.spec, mu_star)
    ev = evaluate(rl, policy)
    D_star, _ = dual_value(rl)
    slack = mu_star * (ev.Jc_value - cfg.spec.rho_bar)
    gap = abs(ev.J_value - D_star) / max(1e-12, abs(D_star))
    summary = {
        "K": policy.K.tolist(),
        "l": policy.l.tolist(),
        "mu_star": mu_star,
        "J": ev.J_value,
        "Jc": ev.Jc_value,
        "rho_bar": cfg.spec.rho_bar,
        "dual_value": D_star,
        "duality_gap_rel": gap,
        "complementary_slackness": slack,
        "outer_iterations_logged": len(log),
    }
    log.to_csv(out / "solve_exact_iterates.csv")
    (out / "solve_exact_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def _learn_one_seed(packed):
    cfg, seed, out_dir = packed
    rs = replace(cfg.random_search, seed=seed)
    rl = RiskLagrangian(cfg.system, cfg.noise, cfg.spec, cfg.mu)
    policy, log = random_search(rl, cfg.policy, rs)
    log.to_csv(Path(out_dir) / f"learn_seed{seed}.csv")
    D, _ = dual_value(rl)
    iters, rels = [], []
    for it, snap in log.snapshots:
        L = evaluate(rl, snap).L_value
        iters.append(it)
        rels.append((L - D) / abs(D))
    return seed, iters, rels, policy_to_table(policy)


def cmd_learn(args) -> int:
    cfg = _load(args)
    out = _prepare_out(cfg)
    if cfg.random_search is None:
        raise ConfigError("learn requires a [random_search] table")
    if cfg.random_search.snapshot_every <= 0:
        cfg.random_search = replace(
            cfg.random_search,
            snapshot_every=max(cfg.random_search.iterations_N // 100, 1),
        )
    jobs = [(cfg, seed, str(out)) for seed in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_learn_one_seed, jobs))
    else:
        results = [_learn_one_seed(j) for j in jobs]

    results.sort()
    iterations = results[0][1]
    per_seed = [rels for _, _, rels, _ in results]
    rows = _aggregate_rows("rel_lagrangian_error", iterations, per_seed)
    _write_long_csv(out / "learn_aggregate.csv", rows)
    finals = [rels[-1] for rels in per_seed]
    summary = {
        "mu": cfg.mu,
        "seeds": [s for s, _, _, _ in results],
        "final_rel_error_per_seed": finals,
        "final_rel_error_median": float(np.median(finals)),
        "final_policy_per_seed": {str(s): pol for s, _, _, pol in results},
        "iterations": cfg.random_search.iterations_N,
        "config_echo": "config_echo.toml",
    }
    (out / "learn_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def _primal_dual_one_seed(packed):
    cfg, seed, out_dir = packed
    pd = replace(cfg.primal_dual, seed=seed)
    if pd.inner == "random_search":
        pd = replace(pd, inner_rs=replace(pd.inner_rs, seed=seed))
    policy, mu_final, log = primal_dual(cfg.system, cfg.noise, cfg.spec, pd, cfg.policy)
    log.to_csv(Path(out_dir) / f"primal_dual_seed{seed}.csv")
    iters, J_vals, Jc_vals = [], [], []
    rl0 = RiskLagrangian(cfg.system, cfg.noise, cfg.spec, 0.0)
    for it, snap in log.snapshots:
        ev = evaluate(rl0, snap)
        iters.append(it)
        J_vals.append(ev.J_value)
        Jc_vals.append(ev.Jc_value)
    return seed, iters, J_vals, Jc_vals, mu_final, policy_to_table(policy)


def cmd_primal_dual(args) -> int:
    cfg = _load(args)
    out = _prepare_out(cfg)
    if cfg.primal_dual is None:
        raise ConfigError("primal-dual requires a [primal_dual] table")
    if cfg.mode == "exact":
        cfg.primal_dual = replace(cfg.primal_dual, inner="exact", inner_rs=None)
    elif cfg.primal_dual.inner == "random_search" and cfg.primal_dual.inner_rs is None:
        raise ConfigError("model-free primal-dual requires a [random_search] table")

    # Normalizers for the aggregate curves: the exact solution.
    exact_cfg = replace(cfg.primal_dual, inner="exact", inner_rs=None)
    X_star, mu_star, _ = primal_dual(cfg.system, cfg.noise, cfg.spec, exact_cfg, cfg.policy)
    ev_star = evaluate(RiskLagrangian(cfg.system, cfg.noise, cfg.spec, 0.0), X_star)
    J_star = ev_star.J_value

    jobs = [(cfg, seed, str(out)) for seed in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_primal_dual_one_seed, jobs))
    else:
        results = [_primal_dual_one_seed(j) for j in jobs]

    results.sort()
    iterations = results[0][1]
    opt_gap = [[abs(J - J_star) / abs(J_star) for J in J_vals]
               for _, _, J_vals, _, _, _ in results]
    viol = [[abs(Jc - cfg.spec.rho_bar) / abs(cfg.spec.rho_bar) for Jc in Jc_vals]
            for _, _, _, Jc_vals, _, _ in results]
    rows = _aggregate_rows("optimality_gap", iterations, opt_gap)
    rows += _aggregate_rows("constraint_violation", iterations, viol)
    _write_long_csv(out / "primal_dual_aggregate.csv", rows)

    summary = {
        "mode": cfg.mode,
        "J_star": J_star,
        "mu_star_exact": mu_star,
        "rho_bar": cfg.spec.rho_bar,
        "seeds": [s for s, *_ in results],
        "final_optimality_gap_per_seed": [g[-1] for g in opt_gap],
        "final_constraint_violation_per_seed": [v[-1] for v in viol],
        "final_optimality_gap_median": float(np.median([g[-1] for g in opt_gap])),
        "final_constraint_violation_median": float(np.median([v[-1] for v in viol])),
        "final_mu_per_seed": [m for _, _, _, _, m, _ in results],
        "final_policy_per_seed": {str(s): pol for s, _, _, _, _, pol in results},
        "config_echo": "config_echo.toml",
    }
    (out / "primal_dual_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _prepare_out(cfg)
    rl = RiskLagrangian(cfg.system, cfg.noise, cfg.spec, cfg.mu)
    roll = RolloutConfig(horizon_T=args.horizon, seed=cfg.seeds[0])
    dump = out / f"trajectory_seed{cfg.seeds[0]}.csv"
    sample = rollout_cost(rl, cfg.policy, roll, dump_path=dump)
    summary = {"L_hat": sample.L_hat, "Jc_hat": sample.Jc_hat,
               "horizon": sample.trajectory_len, "trajectory_csv": str(dump)}
    print(json.dumps(summary, indent=2))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risklqr",
        description="Risk-constrained LQR: exact solvers and model-free primal-dual learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None,
                       help="TOML experiment config (defaults to the built-in benchmark)")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--seeds", type=str, default=None,
                       help="comma-separated seed list, or a count")
        p.add_argument("--workers", type=int, default=None, help="worker pool width")

    p = sub.add_parser("check", help="run the verification battery")
    common(p)
    p.add_argument("--fast", action="store_true", help="smaller sample counts")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve-exact", help="model-based primal-dual solve")
    common(p)
    p.set_defaults(func=cmd_solve_exact)

    p = sub.add_parser("learn", help="random search at fixed multiplier")
    common(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("primal-dual", help="full primal-dual learning")
    common(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact inner solver")
    mode.add_argument("--model-free", dest="model_free", action="store_true",
                      help="random-search inner solver")
    p.set_defaults(func=cmd_primal_dual)

    p = sub.add_parser("simulate", help="one seeded rollout with trajectory dump")
    common(p)
    p.add_argument("--horizon", type=int, default=1000)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    except RiskLqrError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
