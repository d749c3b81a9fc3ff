import json

import numpy as np
import pytest

from adaptctl.cli import main
from adaptctl.scenarios import (
    ConfigError,
    bundled_names,
    load_bundled,
    run_scenario,
    simulate,
    validate_config,
)


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_bundled_configs_validate_and_roundtrip():
    names = bundled_names()
    assert len(names) >= 8
    for n in names:
        cfg = load_bundled(n)
        assert validate_config(cfg.to_dict()) == cfg


def test_str_gamma_bound_cited():
    raw = load_bundled("str_square").to_dict()
    raw["controller"]["gamma"] = 3.0
    with pytest.raises(ConfigError) as info:
        validate_config(raw)
    assert any("(0, 2)" in e for e in info.value.errors)


def test_two_missing_fields_reported_together():
    raw = load_bundled("mrac_state_step").to_dict()
    del raw["plant"]["A"]
    del raw["controller"]["Gamma"]
    with pytest.raises(ConfigError) as info:
        validate_config(raw)
    joined = " ".join(info.value.errors)
    assert "plant.A" in joined and "controller.Gamma" in joined


def test_unknown_kind_and_bad_seed():
    raw = load_bundled("speed_gradient").to_dict()
    raw["kind"] = "nope"
    raw["sim"]["seed"] = -1
    with pytest.raises(ConfigError) as info:
        validate_config(raw)
    assert len(info.value.errors) >= 2


def test_cli_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", "speed_gradient"]) == 0
    raw = load_bundled("str_square").to_dict()
    raw["controller"]["gamma"] = 3.0
    assert main(["validate", _write(tmp_path, raw)]) == 2
    assert "(0, 2)" in capsys.readouterr().err


def test_cli_list(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    assert "bursting" in out and "saturated_mrac" in out


def test_cli_run_pass_writes_artifacts(tmp_path, capsys):
    code = main(["run", "speed_gradient", "passification", "--out", str(tmp_path), "--format", "csv"])
    assert code == 0
    assert (tmp_path / "speed_gradient.csv").exists()
    rep = json.loads((tmp_path / "passification.report.json").read_text())
    assert rep["passed"] is True
    assert "PASS" in capsys.readouterr().out


def test_cli_run_criterion_failure(tmp_path):
    raw = load_bundled("speed_gradient").to_dict()
    raw["criteria"][0]["value"] = -1
    raw["criteria"][0]["op"] = "<"
    assert main(["run", _write(tmp_path, raw), "--out", str(tmp_path)]) == 1


def test_cli_run_abort_on_divergence(tmp_path):
    raw = load_bundled("mrac_state_step").to_dict()
    raw["controller"]["Gamma"] = 1e6
    raw["sim"]["horizon"] = 2.0
    assert main(["run", _write(tmp_path, raw), "--out", str(tmp_path)]) == 3


def test_cli_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("ADAPTCTL_OUT", str(tmp_path / "env"))
    assert main(["run", "estimator_rls", "--format", "json"]) == 0
    assert (tmp_path / "env" / "estimator_rls.json").exists()


def test_seed_determinism():
    cfg = load_bundled("speed_gradient_bregman")
    a = simulate(cfg, seed=11)
    b = simulate(cfg, seed=11)
    assert a.to_csv() == b.to_csv()
    noisy = load_bundled("estimator_sa").to_dict()
    cfg = validate_config(noisy)
    x = simulate(cfg, seed=1)
    y = simulate(cfg, seed=2)
    assert not np.array_equal(x.matrix(x.names), y.matrix(y.names))


def test_report_json_serializable(tmp_path):
    rep = run_scenario(load_bundled("estimator_rls"), tmp_path)
    doc = json.loads(rep.to_json())
    assert doc["passed"] and doc["verdicts"]
