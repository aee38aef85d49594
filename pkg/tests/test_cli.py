import json
import os

import pytest

from monferm.cli import main
from monferm.runner import load_summary


def _run(tmp_path, name, extra=()):
    out = str(tmp_path / name)
    code = main([
        "run", "--protocol", "qj", "--size", "8", "--gamma", "1.0",
        "--trajectories", "2", "--seed", "7", "--out", out,
        "--hist-range", "-0.7", "0.7", "--threads", "1", *extra,
    ])
    assert code == 0
    return out


def test_version_and_help_exit_zero(capsys):
    # argparse raises SystemExit(0) for --version/--help; main converts it
    assert main(["--version"]) == 0
    assert main(["run", "--help"]) == 0
    capsys.readouterr()


def test_missing_command_is_usage_error():
    assert main([]) == 2


def test_unknown_flag_is_usage_error(capsys):
    assert main(["run", "--bogus", "1"]) == 2
    capsys.readouterr()


def test_missing_required_settings_is_usage_error(capsys):
    assert main(["run", "--protocol", "qj"]) == 2
    err = capsys.readouterr().err
    assert "missing required settings" in err


def test_run_writes_outputs(tmp_path, capsys):
    out = _run(tmp_path, "a")
    files = os.listdir(out)
    assert "summary.json" in files
    assert "events.ndjson" in files
    assert any(f.startswith("hist_") and f.endswith(".csv") for f in files)
    stdout = capsys.readouterr().out
    assert "trajectories: 2" in stdout


def test_run_config_file_with_flag_override(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "protocol": "qj", "L": 8, "gamma": 1.0, "n_traj": 1, "seed": 3,
    }))
    out = str(tmp_path / "cfgrun")
    assert main(["run", "--config", str(cfg_path), "--seed", "9", "--out", out]) == 0
    summary = load_summary(os.path.join(out, "summary.json"))
    assert summary["config"]["seed"] == 9  # flag overrides file
    assert summary["config"]["n_traj"] == 1
    capsys.readouterr()


def test_merge_command(tmp_path, capsys):
    out_a = _run(tmp_path, "a")
    out_b = _run(tmp_path, "b", extra=())
    # different seed for the second run
    out_b = str(tmp_path / "b2")
    assert main(["run", "--protocol", "qj", "--size", "8", "--gamma", "1.0",
                 "--trajectories", "2", "--seed", "8", "--out", out_b,
                 "--hist-range", "-0.7", "0.7", "--threads", "1"]) == 0
    merged_path = str(tmp_path / "merged.json")
    code = main(["merge", os.path.join(out_a, "summary.json"),
                 os.path.join(out_b, "summary.json"), "-o", merged_path])
    assert code == 0
    merged = load_summary(merged_path)
    a = load_summary(os.path.join(out_a, "summary.json"))
    b = load_summary(os.path.join(out_b, "summary.json"))
    assert merged["counters"]["n_events"] == a["counters"]["n_events"] + b["counters"]["n_events"]
    capsys.readouterr()


def test_merge_incompatible_is_usage_error(tmp_path, capsys):
    out_a = _run(tmp_path, "a")
    out_c = str(tmp_path / "c")
    assert main(["run", "--protocol", "qj", "--size", "8", "--gamma", "2.0",
                 "--trajectories", "1", "--seed", "7", "--out", out_c,
                 "--threads", "1"]) == 0
    code = main(["merge", os.path.join(out_a, "summary.json"),
                 os.path.join(out_c, "summary.json"), "-o", str(tmp_path / "m.json")])
    assert code == 2
    capsys.readouterr()


def test_merge_missing_file_is_usage_error(tmp_path, capsys):
    assert main(["merge", str(tmp_path / "nope.json"), "-o", str(tmp_path / "m.json")]) == 2
    capsys.readouterr()


def test_oracle_check_passes(capsys):
    code = main(["oracle-check", "--size", "4", "--events", "25", "--seed", "3"])
    out = capsys.readouterr().out
    assert code == 0
    for proto in ("qsd", "qj", "pm"):
        assert proto in out
    assert "FAIL" not in out


def test_oracle_check_fails_at_impossible_tolerance(capsys):
    code = main(["oracle-check", "--size", "4", "--events", "10",
                 "--seed", "3", "--tolerance", "1e-30"])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


def test_fit_command(tmp_path, capsys):
    # wide window so the histogram has enough populated bins to fit
    out = str(tmp_path / "fitrun")
    assert main(["run", "--protocol", "qj", "--size", "16", "--gamma", "1.0",
                 "--trajectories", "10", "--seed", "7", "--out", out,
                 "--window", "2.0", "11.2", "--threads", "1"]) == 0
    capsys.readouterr()
    code = main(["fit", os.path.join(out, "summary.json"),
                 "--observable", "ds_meas", "--model", "gaussian"])
    assert code == 0
    result = json.loads(capsys.readouterr().out)
    assert result["model"] == "gaussian"
    assert "sigma" in result["params"]


def test_fit_unknown_observable_is_usage_error(tmp_path, capsys):
    out = _run(tmp_path, "fitrun2")
    code = main(["fit", os.path.join(out, "summary.json"), "--observable", "nope"])
    assert code == 2
    capsys.readouterr()
