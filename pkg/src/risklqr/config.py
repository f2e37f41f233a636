"""Experiment configuration files: strict TOML in, resolved TOML echo out.

The format describes a system (matrices as row-lists), the noise law as a
tagged union {gaussian, gaussian_mixture, deterministic} with an
``enters_via_B`` flag, exactly one of rho / rho_bar, an initial policy, and
optional run/algorithm tables. Unknown keys anywhere are errors: silent
typos in experiment configs are how wrong results get published.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .model import (
    Deterministic,
    Gaussian,
    GaussianMixture,
    LinearSystem,
    NoiseModel,
    RiskSpec,
)
from .optimize import PrimalDualConfig, RandomSearchConfig
from .policy import Policy

__all__ = ["ExperimentConfig", "load_config", "parse_config", "policy_to_table",
           "policy_from_table", "emit_toml", "config_to_tables"]


_NOISE_KINDS = ("gaussian", "gaussian_mixture", "deterministic")


@dataclass
class ExperimentConfig:
    """Fully-resolved experiment description."""

    system: LinearSystem
    noise: NoiseModel
    spec: RiskSpec
    policy: Policy
    seeds: list[int] = field(default_factory=lambda: [0])
    workers: int = 1
    out_dir: str = "out"
    mode: str = "exact"  # "exact" | "model-free"
    mu: float = 2.0
    random_search: RandomSearchConfig | None = None
    primal_dual: PrimalDualConfig | None = None
    tables: dict = field(default_factory=dict)


def _require_keys(table: dict, allowed: set, path: str):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _get(table: dict, key: str, path: str):
    if key not in table:
        raise ConfigError(f"{path}: missing required key '{key}'")
    return table[key]


def _matrix(value, path: str) -> np.ndarray:
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a numeric matrix ({exc})") from None
    if M.ndim != 2:
        raise ConfigError(f"{path}: expected a list of rows")
    return M

def _vector(value, path: str) -> np.ndarray:
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a numeric vector ({exc})") from None
    if v.ndim != 1:
        raise ConfigError(f"{path}: expected a flat list of reals")
    return v


def _parse_noise(table: dict, Q: np.ndarray, B: np.ndarray, path: str) -> NoiseModel:
    allowed = {"kind", "enters_via_B", "bound_v", "cov_regularization",
               "mean", "cov", "weights", "means", "covs", "value",
               "stat_samples", "stat_seed"}
    _require_keys(table, allowed, path)
    kind = _get(table, "kind", path)
    if kind not in _NOISE_KINDS:
        raise ConfigError(f"{path}.kind: must be one of {_NOISE_KINDS}, got {kind!r}")
    if kind == "gaussian":
        dist = Gaussian(mean=_vector(_get(table, "mean", path), f"{path}.mean"),
                        cov=_matrix(_get(table, "cov", path), f"{path}.cov"))
    elif kind == "gaussian_mixture":
        covs = _get(table, "covs", path)
        dist = GaussianMixture(
            weights=_vector(_get(table, "weights", path), f"{path}.weights"),
            means=_matrix(_get(table, "means", path), f"{path}.means"),
            covs=np.stack([_matrix(c, f"{path}.covs[{i}]") for i, c in enumerate(covs)]),
        )
    else:
        dist = Deterministic(value=_vector(_get(table, "value", path), f"{path}.value"))
    kwargs = {}
    if table.get("enters_via_B", False):
        kwargs["enters_via_B"] = B
    if "bound_v" in table:
        kwargs["bound_v"] = float(table["bound_v"])
    if "cov_regularization" in table:
        kwargs["cov_regularization"] = float(table["cov_regularization"])
    if "stat_samples" in table:
        kwargs["stat_samples"] = int(table["stat_samples"])
    if "stat_seed" in table:
        kwargs["stat_seed"] = int(table["stat_seed"])
    try:
        return NoiseModel.from_distribution(dist, Q, **kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def policy_to_table(policy: Policy) -> dict:
    return {"K": [list(map(float, row)) for row in policy.K],
            "l": [float(v) for v in policy.l]}


def policy_from_table(table: dict, path: str = "policy") -> Policy:
    _require_keys(table, {"K", "l"}, path)
    return Policy(K=_matrix(_get(table, "K", path), f"{path}.K"),
                  l=_vector(_get(table, "l", path), f"{path}.l"))


def _parse_random_search(table: dict, path: str) -> RandomSearchConfig:
    allowed = {"iterations", "radius", "step", "oracle_T", "burn_in", "seed", "estimator",
               "safeguard", "sublevel_factor", "perturbation", "snapshot_every",
               "max_perturb_retries", "max_step_halvings", "divergence_guard",
               "diagnose_stepsize"}
    _require_keys(table, allowed, path)
    try:
        return RandomSearchConfig(
            iterations_N=int(_get(table, "iterations", path)),
            radius_r=float(table.get("radius", 0.2)),
            step_eta=float(table.get("step", 1e-5)),
            oracle_T=int(table.get("oracle_T", 100)),
            oracle_burn_in=int(table.get("burn_in", 0)),
            seed=int(table.get("seed", 0)),
            estimator=table.get("estimator", "antithetic"),
            safeguard=table.get("safeguard", "reject_unstable"),
            sublevel_factor=float(table.get("sublevel_factor", 10.0)),
            perturbation=table.get("perturbation", "sphere"),
            snapshot_every=int(table.get("snapshot_every", 0)),
            max_perturb_retries=int(table.get("max_perturb_retries", 10)),
            max_step_halvings=int(table.get("max_step_halvings", 10)),
            divergence_guard=float(table.get("divergence_guard", 1e9)),
            diagnose_stepsize=bool(table.get("diagnose_stepsize", False)),
        )
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_primal_dual(table: dict, path: str, inner_rs: RandomSearchConfig | None) -> PrimalDualConfig:
    allowed = {"mu_init", "outer_iters", "schedule", "scale", "xi", "inner",
               "risk_oracle_T", "risk_burn_in", "seed", "warm_start", "mu_cap",
               "refine", "refine_tol", "snapshot_every"}
    _require_keys(table, allowed, path)
    try:
        return PrimalDualConfig(
            mu_init=float(table.get("mu_init", 0.0)),
            outer_iters=int(table.get("outer_iters", 40)),
            step_schedule=table.get("schedule", "diminishing"),
            step_scale=float(table["scale"]) if "scale" in table else None,
            xi_constant=float(table["xi"]) if "xi" in table else None,
            inner=table.get("inner", "exact"),
            inner_rs=inner_rs,
            risk_oracle_T=int(table.get("risk_oracle_T", 10_000)),
            risk_burn_in=int(table.get("risk_burn_in", 0)),
            seed=int(table.get("seed", 0)),
            warm_start=bool(table.get("warm_start", True)),
            mu_cap=float(table.get("mu_cap", 1e9)),
            refine=bool(table.get("refine", True)),
            refine_tol=float(table.get("refine_tol", 1e-6)),
            snapshot_every=int(table.get("snapshot_every", 1)),
        )
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_config(data: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from parsed TOML tables (strict)."""
    allowed = {"system", "noise", "risk", "policy", "run", "random_search", "primal_dual"}
    _require_keys(data, allowed, "config")
    for key in ("system", "noise", "risk", "policy"):
        if key not in data:
            raise ConfigError(f"config: missing required table [{key}]")

    sys_table = data["system"]
    _require_keys(sys_table, {"A", "B", "Q", "R"}, "system")
    try:
        system = LinearSystem(
            A=_matrix(_get(sys_table, "A", "system"), "system.A"),
            B=_matrix(_get(sys_table, "B", "system"), "system.B"),
            Q=_matrix(_get(sys_table, "Q", "system"), "system.Q"),
            R=_matrix(_get(sys_table, "R", "system"), "system.R"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from None

    noise = _parse_noise(data["noise"], system.Q, system.B, "noise")

    risk_table = data["risk"]
    _require_keys(risk_table, {"rho", "rho_bar"}, "risk")
    if ("rho" in risk_table) == ("rho_bar" in risk_table):
        raise ConfigError("risk: specify exactly one of 'rho' or 'rho_bar'")
    try:
        if "rho" in risk_table:
            spec = RiskSpec.from_rho(float(risk_table["rho"]), noise, system.Q)
        else:
            spec = RiskSpec.from_rho_bar(float(risk_table["rho_bar"]), noise, system.Q)
    except ConfigError as exc:
        raise ConfigError(f"risk: {exc}") from None

    policy = policy_from_table(data["policy"])
    if policy.K.shape != (system.m, system.n):
        raise ConfigError(
            f"policy.K: expected shape {(system.m, system.n)}, got {policy.K.shape}"
        )

    run = data.get("run", {})
    _require_keys(run, {"seeds", "seed_count", "workers", "out", "mode", "mu"}, "run")
    if "seeds" in run and "seed_count" in run:
        raise ConfigError("run: specify either 'seeds' or 'seed_count', not both")
    if "seeds" in run:
        seeds = [int(s) for s in run["seeds"]]
    else:
        seeds = list(range(int(run.get("seed_count", 1))))
    mode = run.get("mode", "exact")
    if mode not in ("exact", "model-free"):
        raise ConfigError(f"run.mode: must be 'exact' or 'model-free', got {mode!r}")

    rs = _parse_random_search(data["random_search"], "random_search") if "random_search" in data else None
    pd = _parse_primal_dual(data["primal_dual"], "primal_dual", rs) if "primal_dual" in data else None

    return ExperimentConfig(
        system=system,
        noise=noise,
        spec=spec,
        policy=policy,
        seeds=seeds,
        workers=int(run.get("workers", 1)),
        out_dir=str(run.get("out", "out")),
        mode=mode,
        mu=float(run.get("mu", 2.0)),
        random_search=rs,
        primal_dual=pd,
        tables=data,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from None
    return parse_config(data)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return repr(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, np.ndarray):
        return _toml_value(v.tolist())
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize value of type {type(v).__name__} to TOML")


def emit_toml(tables: dict) -> str:
    """Serialize nested dict tables to TOML text (the strict subset we parse)."""
    lines = []
    scalars = {k: v for k, v in tables.items() if not isinstance(v, dict)}
    for k, v in scalars.items():
        lines.append(f"{k} = {_toml_value(v)}")
    for k, v in tables.items():
        if isinstance(v, dict):
            lines.append("")
            lines.append(f"[{k}]")
            for kk, vv in v.items():
                if isinstance(vv, dict):
                    raise ConfigError("TOML emitter supports one level of nesting")
                lines.append(f"{kk} = {_toml_value(vv)}")
    return "\n".join(lines).strip() + "\n"


def config_to_tables(cfg: ExperimentConfig) -> dict:
    """Resolved tables for the config echo (reparseable by load_config)."""
    tables = {k: dict(v) for k, v in cfg.tables.items()}
    tables.setdefault("run", {})
    tables["run"]["seeds"] = list(cfg.seeds)
    tables["run"].pop("seed_count", None)
    tables["run"]["workers"] = cfg.workers
    tables["run"]["out"] = cfg.out_dir
    tables["run"]["mode"] = cfg.mode
    tables["run"]["mu"] = cfg.mu
    return tables
