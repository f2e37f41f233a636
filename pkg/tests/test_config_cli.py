import json

import numpy as np
import pytest

from risklqr import ConfigError, uav_benchmark
from risklqr.cli import main
from risklqr.config import (
    config_to_tables,
    emit_toml,
    load_config,
    parse_config,
    policy_from_table,
    policy_to_table,
)


def base_tables():
    return {
        "system": {
            "A": [[1.0, 0.5, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0],
                  [0.0, 0.0, 1.0, 0.5], [0.0, 0.0, 0.0, 1.0]],
            "B": [[0.125, 0.0], [0.5, 0.0], [0.0, 0.125], [0.0, 0.5]],
            "Q": [[1.0, 0, 0, 0], [0, 0.1, 0, 0], [0, 0, 2.0, 0], [0, 0, 0, 0.2]],
            "R": [[1.0, 0.0], [0.0, 1.0]],
        },
        "noise": {
            "kind": "gaussian_mixture",
            "enters_via_B": True,
            "weights": [0.2, 0.8],
            "means": [[3.0, 0.0], [8.0, 0.0]],
            "covs": [[[30.0, 0.0], [0.0, 0.01]], [[60.0, 0.0], [0.0, 0.01]]],
        },
        "risk": {"rho": 15.0},
        "policy": {"K": [[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]], "l": [-6.0, 0.0]},
        "run": {"seeds": [0], "workers": 1, "out": "out", "mode": "exact", "mu": 2.0},
    }


class TestParsing:
    def test_parses_the_benchmark_tables(self):
        cfg = parse_config(base_tables())
        system, noise, spec, policy = uav_benchmark()
        np.testing.assert_allclose(cfg.system.A, system.A)
        np.testing.assert_allclose(cfg.noise.W, noise.W, atol=1e-12)
        assert cfg.spec.rho_bar == pytest.approx(spec.rho_bar, abs=1e-12)
        np.testing.assert_allclose(cfg.policy.as_matrix(), policy.as_matrix())

    def test_unknown_key_rejected_with_path(self):
        tables = base_tables()
        tables["noise"]["kindd"] = "gaussian"
        with pytest.raises(ConfigError, match="noise.*kindd"):
            parse_config(tables)

    def test_unknown_top_level_table_rejected(self):
        tables = base_tables()
        tables["extra"] = {}
        with pytest.raises(ConfigError, match="extra"):
            parse_config(tables)

    def test_rho_and_rho_bar_mutually_exclusive(self):
        tables = base_tables()
        tables["risk"] = {"rho": 15.0, "rho_bar": 26.0}
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(tables)
        tables["risk"] = {}
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(tables)

    def test_non_pd_input_cost_is_config_error(self):
        tables = base_tables()
        tables["system"]["R"] = [[1.0, 0.0], [0.0, 0.0]]
        with pytest.raises(ConfigError, match="positive definite"):
            parse_config(tables)

    def test_policy_shape_checked(self):
        tables = base_tables()
        tables["policy"] = {"K": [[0.5, 0.5], [0.0, 0.0]], "l": [-6.0, 0.0]}
        with pytest.raises(ConfigError, match="policy.K"):
            parse_config(tables)

    def test_bad_noise_kind(self):
        tables = base_tables()
        tables["noise"]["kind"] = "cauchy"
        with pytest.raises(ConfigError, match="kind"):
            parse_config(tables)

    def test_emit_parse_round_trip(self):
        cfg = parse_config(base_tables())
        text = emit_toml(config_to_tables(cfg))
        import tomli

        cfg2 = parse_config(tomli.loads(text))
        np.testing.assert_allclose(cfg2.system.A, cfg.system.A)
        assert cfg2.spec.rho == cfg.spec.rho
        assert cfg2.mode == cfg.mode

    def test_policy_table_round_trip(self):
        _, _, _, policy = uav_benchmark()
        again = policy_from_table(policy_to_table(policy))
        assert np.array_equal(again.as_matrix(), policy.as_matrix())

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.toml")


def write_config(tmp_path, tables):
    path = tmp_path / "exp.toml"
    path.write_text(emit_toml(tables))
    return str(path)


class TestCliExitCodes:
    def test_config_error_exits_2(self, tmp_path, capsys):
        tables = base_tables()
        tables["system"]["R"] = [[1.0, 0.0], [0.0, 0.0]]
        path = write_config(tmp_path, tables)
        code = main(["check", "--config", path, "--out", str(tmp_path / "out")])
        assert code == 2
        assert "positive definite" in capsys.readouterr().err

    def test_unstable_initial_policy_exits_3_naming_radius(self, tmp_path, capsys):
        tables = base_tables()
        tables["policy"] = {"K": [[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]],
                            "l": [0.0, 0.0]}
        tables["random_search"] = {"iterations": 10}
        path = write_config(tmp_path, tables)
        code = main(["learn", "--config", path, "--out", str(tmp_path / "out")])
        assert code == 3
        assert "radius" in capsys.readouterr().err

    def test_check_fast_passes_on_benchmark(self, tmp_path, capsys):
        code = main(["check", "--fast", "--out", str(tmp_path / "out")])
        out = capsys.readouterr().out
        assert code == 0
        assert "checks passed" in out
        assert (tmp_path / "out" / "check_report.txt").exists()
        assert (tmp_path / "out" / "config_echo.toml").exists()


class TestCliLearn:
    def test_log_contract_and_determinism(self, tmp_path, capsys):
        tables = base_tables()
        tables["run"] = {"seeds": [3], "workers": 1, "out": str(tmp_path / "o1"),
                         "mode": "model-free", "mu": 2.0}
        tables["random_search"] = {"iterations": 10, "snapshot_every": 5}
        path = write_config(tmp_path, tables)
        assert main(["learn", "--config", path]) == 0
        csv1 = (tmp_path / "o1" / "learn_seed3.csv").read_bytes()
        lines = csv1.decode().strip().splitlines()
        assert lines[0] == "# schema: risklqr-iterates v1"
        assert len(lines) == 2 + 10  # schema + header + one row per iteration

        assert main(["learn", "--config", path, "--out", str(tmp_path / "o2")]) == 0
        csv2 = (tmp_path / "o2" / "learn_seed3.csv").read_bytes()
        assert csv1 == csv2

        summary = json.loads((tmp_path / "o1" / "learn_summary.json").read_text())
        assert summary["seeds"] == [3]
        assert (tmp_path / "o1" / "learn_aggregate.csv").exists()

    def test_rerun_from_echo_is_byte_identical(self, tmp_path, capsys):
        tables = base_tables()
        tables["run"] = {"seeds": [1], "workers": 1, "out": str(tmp_path / "a"),
                         "mode": "model-free", "mu": 2.0}
        tables["random_search"] = {"iterations": 12, "snapshot_every": 4}
        path = write_config(tmp_path, tables)
        assert main(["learn", "--config", path]) == 0
        echo = tmp_path / "a" / "config_echo.toml"
        assert main(["learn", "--config", str(echo), "--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "learn_seed1.csv").read_bytes()
        b = (tmp_path / "b" / "learn_seed1.csv").read_bytes()
        assert a == b

    def test_seed_count_flag(self, tmp_path, capsys):
        tables = base_tables()
        tables["random_search"] = {"iterations": 5}
        path = write_config(tmp_path, tables)
        assert main(["learn", "--config", path, "--seeds", "2",
                     "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "learn_seed0.csv").exists()
        assert (tmp_path / "o" / "learn_seed1.csv").exists()


class TestCliSolveExact:
    def test_benchmark_constraint_active_at_tolerance(self, tmp_path, capsys):
        assert main(["solve-exact", "--out", str(tmp_path / "out")]) == 0
        summary = json.loads((tmp_path / "out" / "solve_exact_summary.json").read_text())
        assert summary["mu_star"] > 0.0
        rho_bar = summary["rho_bar"]
        assert abs(summary["Jc"] - rho_bar) <= 1e-6 * rho_bar
        assert summary["duality_gap_rel"] <= 1e-6

    def test_slack_budget_gives_unconstrained_solution(self, tmp_path, capsys):
        tables = base_tables()
        tables["risk"] = {"rho_bar": 200.0}
        path = write_config(tmp_path, tables)
        assert main(["solve-exact", "--config", path, "--out", str(tmp_path / "out")]) == 0
        summary = json.loads((tmp_path / "out" / "solve_exact_summary.json").read_text())
        assert summary["mu_star"] == 0.0
        assert summary["Jc"] < 200.0


class TestCliSimulate:
    def test_writes_trajectory(self, tmp_path, capsys):
        assert main(["simulate", "--horizon", "50", "--out", str(tmp_path / "out")]) == 0
        traj = tmp_path / "out" / "trajectory_seed0.csv"
        lines = traj.read_text().strip().splitlines()
        assert lines[0] == "# schema: risklqr-trajectory v1"
        assert len(lines) == 2 + 50


class TestCliPrimalDualExact:
    def test_exact_mode_summary(self, tmp_path, capsys):
        tables = base_tables()
        tables["primal_dual"] = {"outer_iters": 10, "inner": "exact"}
        path = write_config(tmp_path, tables)
        assert main(["primal-dual", "--exact", "--config", path,
                     "--out", str(tmp_path / "out")]) == 0
        summary = json.loads((tmp_path / "out" / "primal_dual_summary.json").read_text())
        assert summary["mode"] == "exact"
        assert summary["final_optimality_gap_median"] <= 1e-6
        assert summary["final_constraint_violation_median"] <= 1e-6
        assert (tmp_path / "out" / "primal_dual_aggregate.csv").exists()
