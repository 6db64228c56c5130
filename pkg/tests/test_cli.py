"""Config validation, experiment dispatch, determinism, exit codes."""

import json

import numpy as np
import pytest

from sol_lab.cli import main, run, serialize, validate


def config_text(**overrides):
    base = {
        "schema_version": 1,
        "grid": {"n_theta": 33, "n_phi": 66},
        "weight": {"points": [{"position": [0, 0, 1], "order": -0.5}]},
        "experiment": {"kind": "constants"},
        "seed": 0,
        "output": {},
    }
    base.update(overrides)
    return json.dumps(base)


class TestValidate:
    def test_well_formed(self):
        config, errors = validate(config_text())
        assert not errors
        assert config["experiment"]["kind"] == "constants"

    def test_json_error_is_line_referenced(self):
        _, errors = validate('{\n  "grid": {,}\n}')
        assert errors and "line 2" in errors[0]

    def test_order_below_minus_one(self):
        text = config_text(weight={"points": [
            {"position": [0, 0, 1], "order": -1.2}]})
        _, errors = validate(text)
        assert any("order must exceed -1" in e for e in errors)

    def test_zero_order(self):
        text = config_text(weight={"points": [
            {"position": [0, 0, 1], "order": 0.0}]})
        _, errors = validate(text)
        assert any("nonzero" in e for e in errors)

    def test_coincident_points(self):
        text = config_text(weight={"points": [
            {"position": [0, 0, 1], "order": -0.5},
            {"position": [0, 0, 1.0000000001], "order": 0.5}]})
        _, errors = validate(text)
        assert any("pairwise distinct" in e for e in errors)

    def test_kw_check_requires_antipodal(self):
        text = config_text(
            weight={"points": [{"position": [1, 0, 0], "order": -0.5}]},
            experiment={"kind": "kw-check"})
        _, errors = validate(text)
        assert any("antipodal" in e for e in errors)

    def test_unknown_kind(self):
        text = config_text(experiment={"kind": "explode"})
        _, errors = validate(text)
        assert any("experiment.kind" in e for e in errors)

    def test_epsilons_must_decrease(self):
        text = config_text(experiment={"kind": "sweep",
                                       "epsilons": [0.1, 0.2]})
        _, errors = validate(text)
        assert any("decreasing" in e for e in errors)

    def test_round_trip(self):
        config, errors = validate(config_text())
        assert not errors
        config2, errors2 = validate(serialize(config))
        assert not errors2
        assert config2 == config


class TestRun:
    def test_constants_report(self):
        config, _ = validate(config_text())
        report = run(config)
        assert report["passed"]
        assert report["summary"]["C"] == pytest.approx(np.log(2.0),
                                                       abs=1e-12)
        assert report["summary"]["inf_J"] == pytest.approx(
            -4.0 * np.pi * np.log(2.0), rel=1e-12)

    def test_determinism(self):
        config, _ = validate(config_text(
            experiment={"kind": "inequality-sample", "samples": 3},
            weight={"points": []},
            grid={"n_theta": 17, "n_phi": 34},
        ))
        r1, r2 = run(config), run(config)
        r1.pop("wall_clock_s"), r2.pop("wall_clock_s")
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)

    def test_seed_changes_samples(self):
        base = dict(experiment={"kind": "inequality-sample", "samples": 2},
                    weight={"points": []}, grid={"n_theta": 17, "n_phi": 34})
        c1, _ = validate(json.dumps({**base, "seed": 0}))
        c2, _ = validate(json.dumps({**base, "seed": 1}))
        g1 = [r["gap"] for r in run(c1)["records"] if "gap" in r]
        g2 = [r["gap"] for r in run(c2)["records"] if "gap" in r]
        assert g1[0] != g2[0]


class TestMainEntry:
    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(config_text(weight={"points": [
            {"position": [0, 0, 1], "order": -3}]}))
        assert main(["constants", "--config", str(bad)]) == 2
        assert "order must exceed -1" in capsys.readouterr().err

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["constants", "--config",
                     str(tmp_path / "nope.json")]) == 2

    def test_kind_mismatch(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(config_text())
        assert main(["sweep", "--config", str(cfg)]) == 2

    def test_pass_run_writes_report(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        out = tmp_path / "report.json"
        cfg.write_text(config_text())
        assert main(["constants", "--config", str(cfg),
                     "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["passed"]
        assert "PASS" in capsys.readouterr().out

    def test_tolerance_failure_exit_code(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(config_text(
            experiment={"kind": "constants", "consistency_tol": 1e-30}))
        assert main(["constants", "--config", str(cfg)]) == 1

    def test_numerical_failure_exit_code(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(config_text(
            grid={"n_theta": 33, "n_phi": 66},
            experiment={"kind": "minimize", "epsilon": 0.2,
                        "max_iterations": 2}))
        assert main(["minimize", "--config", str(cfg)]) == 3

    def test_traces_written(self, tmp_path):
        cfg = tmp_path / "c.json"
        trace = tmp_path / "trace.csv"
        cfg.write_text(config_text(
            grid={"n_theta": 33, "n_phi": 66},
            experiment={"kind": "minimize", "epsilon": 0.5,
                        "max_iterations": 2000},
            output={"traces": str(trace)}))
        assert main(["minimize", "--config", str(cfg)]) == 0
        header, first = trace.read_text().splitlines()[:2]
        assert set(header.split(",")) == {"iteration", "J", "residual",
                                          "lambda"}
        # 17 significant digits on float columns
        j_field = first.split(",")[header.split(",").index("J")]
        assert len(j_field.replace("-", "").replace(".", "")
                   .replace("e", "").lstrip("0")) >= 15

    def test_verify_extremal_kind(self, tmp_path):
        cfg = tmp_path / "c.json"
        out = tmp_path / "r.json"
        cfg.write_text(config_text(
            grid={"n_theta": 97, "n_phi": 194},
            weight={"points": []},
            experiment={"kind": "verify-extremal", "alpha": -0.5,
                        "rel_tol": 0.01, "invariance_tol": 5e-3}))
        assert main(["verify-extremal", "--config", str(cfg),
                     "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["summary"]["closed_form"] == pytest.approx(
            4 * np.pi * (0.5 - np.log(2.0)))

    def test_kw_check_extremal_kind(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(config_text(
            grid={"n_theta": 65, "n_phi": 130},
            weight={"points": [{"position": [0, 0, 1], "order": -0.5},
                               {"position": [0, 0, -1], "order": -0.5}]},
            experiment={"kind": "kw-check", "use_extremal": True,
                        "alpha": -0.5}))
        assert main(["kw-check", "--config", str(cfg)]) == 0

    def test_negative_smooth_factor_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(config_text(
            weight={"points": [],
                    "K": {"base": 0.1,
                          "harmonics": [{"l": 1, "m": 0, "coeff": 3.0}]}}))
        assert main(["constants", "--config", str(cfg)]) == 2
        assert "positive" in capsys.readouterr().err

    def test_log_env_var(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("SOL_LAB_LOG", "info")
        cfg = tmp_path / "c.json"
        cfg.write_text(config_text())
        assert main(["constants", "--config", str(cfg)]) == 0

    def test_test_function_sweep_kind(self, tmp_path):
        cfg = tmp_path / "c.json"
        out = tmp_path / "r.json"
        cfg.write_text(config_text(
            experiment={"kind": "test-function-sweep",
                        "epsilons": [1e-2, 1e-3]}))
        assert main(["test-function-sweep", "--config", str(cfg),
                     "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["summary"]["target"] == pytest.approx(
            -4.0 * np.pi * np.log(2.0), rel=1e-12)

    def test_nonexistence_rejects_non_antipodal_pair(self):
        """Sharp-constant requests for tilted pairs carry no closed form."""
        from sol_lab.identity_checks import RegimeError, sphere_sharp_constant
        with pytest.raises(RegimeError):
            sphere_sharp_constant(-0.5, 0.5, antipodal=False)
