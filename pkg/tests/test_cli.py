"""Command-line interface: subcommands, exit codes, emitted files."""

import json
import subprocess
import sys

import pytest

from dynavine import cli
from dynavine.errors import DataError, NumericalError


def read_csv_rows(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    return header, [dict(zip(header, line.split(","))) for line in lines[1:]]


# ---------------------------------------------------------------------------
# generate


def test_generate_writes_dataset(tmp_path, capsys):
    out = tmp_path / "ds"
    assert cli.main(["generate", "--scenario", "tail_switch",
                     "--out", str(out)]) == 0
    assert (out / "manifest.json").exists()
    windows = sorted(out.glob("window_*.csv"))
    assert len(windows) == 24
    lines = windows[0].read_text().strip().split("\n")
    assert len(lines) == 251                      # header + 250 rows
    assert len(lines[1].split(",")) == 5
    assert "24 windows" in capsys.readouterr().out


def test_generate_same_seed_hash_equal(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["generate", "--scenario", "tail_switch", "--seed", "5",
              "--out", str(a)])
    cli.main(["generate", "--scenario", "tail_switch", "--seed", "5",
              "--out", str(b)])
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    assert (a / "window_000.csv").read_bytes() == (b / "window_000.csv").read_bytes()


def test_generate_unknown_scenario(capsys):
    assert cli.main(["generate", "--scenario", "nope"]) == 2
    err = capsys.readouterr().err
    assert "config error" in err
    assert "tail_df" in err                       # message lists valid names


def test_run_requires_scenario(capsys):
    assert cli.main(["run"]) == 2
    assert "scenario" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# run


def test_run_estimator_list_only(tmp_path, capsys):
    out = tmp_path / "run"
    rc = cli.main(["run", "--scenario", "xor_stress",
                   "--estimators", "gaussian_windowed", "--out", str(out)])
    assert rc == 0
    header, rows = read_csv_rows(out / "report.csv")
    assert header == ["scenario", "primary_estimator", "method", "role",
                      "mean_heldout_nll", "gap_vs_primary",
                      "positive_window_fraction"]
    assert {r["method"] for r in rows} == {"gaussian_windowed", "truncated_1"}
    assert all(r["primary_estimator"] == "gaussian_windowed" for r in rows)

    _, dec = read_csv_rows(out / "decomposition.csv")
    assert len(dec) == 8
    for r in dec:
        total = float(r["S_pair"]) + float(r["Delta_HO"])
        assert abs(float(r["S_total"]) - total) < 1e-9

    assert (out / "models" / "gaussian_windowed.json").exists()
    _, status = read_csv_rows(out / "run_status.csv")
    assert status == [{"method": "gaussian_windowed", "status": "ok",
                       "detail": ""}]
    assert json.loads((out / "run_summary.json").read_text())["failures"] == {}
    stdout = capsys.readouterr().out
    assert stdout.startswith("scenario,primary_estimator,method,role,")


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["run", "--scenario", "xor_stress",
            "--estimators", "gaussian_windowed"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()
    assert (a / "decomposition.csv").read_bytes() == (b / "decomposition.csv").read_bytes()


def test_run_config_file(tmp_path):
    out = tmp_path / "from_config"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "scenario": "xor_stress",
        "estimators": ["gaussian_windowed"],
        "out": str(out),
    }))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    assert (out / "report.csv").exists()


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]")
    assert cli.main(["run", "--config", str(listed)]) == 2


def test_unknown_estimator_rejected(capsys):
    rc = cli.main(["run", "--scenario", "xor_stress", "--estimators", "oracle"])
    assert rc == 2
    assert "unknown estimator" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# exit code mapping


def test_exit_codes_for_error_types(monkeypatch, capsys):
    def data_boom(args):
        raise DataError("broken rows")

    def numeric_boom(args):
        raise NumericalError("diverged")

    monkeypatch.setitem(cli.COMMANDS, "generate", data_boom)
    assert cli.main(["generate", "--scenario", "tail_switch"]) == 3
    assert "data error" in capsys.readouterr().err

    monkeypatch.setitem(cli.COMMANDS, "generate", numeric_boom)
    assert cli.main(["generate", "--scenario", "tail_switch"]) == 4
    assert "numerical error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# runtime


def test_runtime_command_small_grid(tmp_path, capsys):
    cfg = tmp_path / "grid.json"
    cfg.write_text(json.dumps({"d_list": [3], "T_list": [2]}))
    out = tmp_path / "scaling.csv"
    rc = cli.main(["runtime", "--config", str(cfg), "--out", str(out),
                   "--repeats", "1"])
    assert rc == 0
    header, rows = read_csv_rows(out)
    assert header == ["d", "T", "variant", "edge_fits", "compression",
                      "total_time_s", "time_per_window_s"]
    by_variant = {r["variant"]: r for r in rows}
    assert by_variant["windowed"]["edge_fits"] == "6"        # T*d(d-1)/2
    assert by_variant["windowed"]["compression"] == "1x"
    assert by_variant["joint_dynamic"]["edge_fits"] == "3"   # d(d-1)/2
    assert by_variant["joint_dynamic"]["compression"] == "2x"
    stdout = capsys.readouterr().out
    assert stdout.startswith("d,T,variant,edge_fits,compression,")


# ---------------------------------------------------------------------------
# decompose and null


def test_decompose_command(tmp_path, capsys):
    out = tmp_path / "dec"
    rc = cli.main(["decompose", "--scenario", "xor_stress",
                   "--estimators", "gaussian_windowed", "--out", str(out)])
    assert rc == 0
    assert (out / "decomposition.csv").exists()
    stdout = capsys.readouterr().out
    assert stdout.startswith("t,S_total,S_pair,Delta_HO")


def test_null_command(tmp_path, capsys):
    out = tmp_path / "null"
    rc = cli.main(["null", "--scenario", "xor_stress",
                   "--estimators", "gaussian_windowed",
                   "--null-seed", "3", "--out", str(out)])
    assert rc == 0
    _, rows = read_csv_rows(out / "decomposition.csv")
    # the gaussian baseline has no higher trees, so the null split is exact
    assert all(float(r["Delta_HO"]) == 0.0 for r in rows)
    assert "mean Delta_HO" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# console entry point


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "dynavine.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("generate", "run", "runtime", "decompose", "null"):
        assert name in proc.stdout
