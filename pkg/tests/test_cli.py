"""The chaoslab command line: run, selftest, report."""

import json
from pathlib import Path

import pytest

from chaoslab.bounds import CSV_HEADER
from chaoslab.cli import (EXIT_OK, EXIT_VIOLATION, cmd_report, cmd_run,
                          cmd_selftest, main)

SMALL_CONFIG = """\
master_seed: 2024
experiments:
  - theorem_id: thm2_1
    model:
      dims: [2, 2]
      beta1: 1.0
      beta2: 1.0
    grid:
      t: [0.0, 0.5, 0.9]
    n_disorder: 32
  - theorem_id: eqlast2
    model:
      dims: [2, 3]
      h: 1.0
    n_disorder: 16
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(SMALL_CONFIG)
    return path


def test_run_produces_results(config_path, tmp_path):
    out = tmp_path / "out"
    assert cmd_run(str(config_path), str(out)) == EXIT_OK
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 3 + 1
    for line in lines[1:]:
        assert line.split(",")[-1] == "pass"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["row_count"] == 4
    assert manifest["master_seed"] == 2024
    assert len(manifest["config_sha256"]) == 64
    assert manifest["wall_clock_seconds"] >= 0
    # grid experiments emit two-column plot data for lhs and rhs
    lhs_file = out / "plot_00_thm2_1_t_lhs.dat"
    rhs_file = out / "plot_00_thm2_1_t_rhs.dat"
    assert lhs_file.exists() and rhs_file.exists()
    rows = [l.split() for l in lhs_file.read_text().splitlines()]
    assert [float(r[0]) for r in rows] == [0.0, 0.5, 0.9]
    assert all(len(r) == 2 for r in rows)


def test_run_is_deterministic(config_path, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cmd_run(str(config_path), str(out1))
    cmd_run(str(config_path), str(out2))
    assert (out1 / "results.csv").read_bytes() \
        == (out2 / "results.csv").read_bytes()


def test_run_seed_override_changes_results(config_path, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cmd_run(str(config_path), str(out1))
    cmd_run(str(config_path), str(out2), seed_override=77)
    assert (out1 / "results.csv").read_bytes() \
        != (out2 / "results.csv").read_bytes()
    manifest = json.loads((out2 / "manifest.json").read_text())
    assert manifest["master_seed"] == 77


def test_run_rejects_bad_configs(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiments: {not: a list}\n")
    with pytest.raises(SystemExit):
        cmd_run(str(bad), str(tmp_path / "o1"))
    missing = tmp_path / "missing.yaml"
    missing.write_text("experiments:\n  - model: {dims: [2]}\n")
    with pytest.raises(SystemExit):
        cmd_run(str(missing), str(tmp_path / "o2"))
    unparseable = tmp_path / "nope.yaml"
    unparseable.write_text("experiments: [a, {b\n")
    with pytest.raises(SystemExit):
        cmd_run(str(unparseable), str(tmp_path / "o3"))


def test_run_empty_experiments(tmp_path):
    cfg = tmp_path / "empty.yaml"
    cfg.write_text("experiments: []\n")
    out = tmp_path / "out"
    assert cmd_run(str(cfg), str(out)) == EXIT_OK
    assert (out / "results.csv").read_text() == CSV_HEADER + "\n"


def test_selftest_fault_injection(capsys):
    assert cmd_selftest(fault="hermite") == 1
    captured = capsys.readouterr()
    assert "hermite_ibp_residual" in captured.err


def test_report_summarizes_and_flags_failures(tmp_path, capsys):
    rows = [
        CSV_HEADER,
        "thm2_1,ea,4,4,0.5,1,1,,32,exact,0.2,0.01,1.1,0.9,pass",
        "thm2_1,ea,12,9,0.5,1,1,,32,exact,0.1,0.01,0.65,0.55,pass",
    ]
    good = tmp_path / "good.csv"
    good.write_text("\n".join(rows) + "\n")
    assert cmd_report(str(good)) == EXIT_OK
    out = capsys.readouterr().out
    assert "min_slack=0.55" in out
    assert "scaling exponent" in out
    assert "0 violations" in out

    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(rows[:2]) + "\n"
                   + "thm2_1,ea,4,4,0.5,1,1,,32,exact,2.0,0.01,1.1,-0.9,fail\n")
    assert cmd_report(str(bad)) == EXIT_VIOLATION
    assert "1 violations" in capsys.readouterr().out


def test_report_rejects_foreign_schema(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(SystemExit):
        cmd_report(str(path))


def test_main_dispatch(config_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_path),
                 "--out", str(out)]) == EXIT_OK
    assert main(["report", str(out / "results.csv")]) == EXIT_OK
    with pytest.raises(SystemExit):
        main(["frobnicate"])
