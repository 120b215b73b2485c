"""Command-line workflows: check, run bundles, plots, batch, exit codes."""

import filecmp
import json

import pytest

from safeform.cli import main
from safeform.scenario_io import available_scenarios, load_scenario

BUNDLE_FILES = ["trajectory.csv", "metrics.csv", "events.csv", "summary.json", "scenario.yaml"]

LOST_YAML = """\
name: lost
radius: 5.2
margin: 0.52
duration: 30.0
target: {type: circle, center: [40.0, 0.0], radius: 2.0}
formation: {targets: [[0.0, 0.0], [-4.0, 0.0]]}
params: {c3: 30.0, u_max: 50.0}
agents:
  - {position: [0.0, 0.0], leader: true}
  - {position: [-1.5, 0.0]}
"""


# ---------------------------------------------------------------------------
# check


def test_check_all_shipped_scenarios(capsys):
    for name in available_scenarios():
        assert main(["check", name]) == 0
        assert "ok" in capsys.readouterr().out


def test_check_reports_parameter_violation(capsys):
    code = main(["check", "nominal", "--override", "params.k1=1.0"])
    assert code == 1
    out = capsys.readouterr().out
    assert "violation:" in out and "k1" in out


def test_check_reports_disconnected_layout(capsys):
    code = main(["check", "nominal", "--override", "agents.0.position=[50.0, 0.0]"])
    assert code == 1
    assert "not connected" in capsys.readouterr().out


def test_check_parse_error_carries_location(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("radius: 5.2\nagents: [\n")
    assert main(["check", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "parse error" in err and "line" in err


def test_check_unknown_name_is_io_error(capsys):
    assert main(["check", "nosuch"]) == 3
    assert "nosuch" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# run


def test_run_writes_bundle(tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["run", "nominal", "--duration", "0.02", "--out", str(out)]) == 0
    for name in BUNDLE_FILES:
        assert (out / name).is_file(), name
    # 20 steps -> 21 rows, 5 agents each, plus header
    assert len((out / "trajectory.csv").read_text().splitlines()) == 1 + 21 * 5
    assert len((out / "metrics.csv").read_text().splitlines()) == 1 + 21
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"] == "nominal"
    assert summary["aborted"] is None
    assert "formation error" in capsys.readouterr().out


def test_run_zero_duration_single_row(tmp_path):
    out = tmp_path / "b"
    assert main(["run", "nominal", "--duration", "0", "--out", str(out)]) == 0
    assert len((out / "trajectory.csv").read_text().splitlines()) == 1 + 5
    assert len((out / "metrics.csv").read_text().splitlines()) == 2


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", "single_obstacle", "--duration", "0.3", "--out", str(out)]) == 0
    for name in BUNDLE_FILES:
        assert filecmp.cmp(a / name, b / name, shallow=False), name


def test_seed_flag_is_accepted_and_inert(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "nominal", "--duration", "0.05", "--out", str(a)]) == 0
    assert main(["run", "nominal", "--duration", "0.05", "--out", str(b), "--seed", "7"]) == 0
    for name in BUNDLE_FILES:
        assert filecmp.cmp(a / name, b / name, shallow=False), name


def test_run_override_lands_in_resolved_scenario(tmp_path):
    out = tmp_path / "b"
    code = main(
        ["run", "nominal", "--duration", "0", "--out", str(out), "--override", "params.c2=0.06"]
    )
    assert code == 0
    assert load_scenario(out / "scenario.yaml").params.c2 == 0.06


def test_run_validation_failure_blocks_simulation(tmp_path, capsys):
    out = tmp_path / "b"
    code = main(
        ["run", "nominal", "--out", str(out), "--override", "agents.0.velocity=[1.0, 0.0]"]
    )
    assert code == 1
    assert not out.exists()
    assert "violation" in capsys.readouterr().err


def test_run_abort_exit_code_and_partial_bundle(tmp_path, capsys):
    sc_file = tmp_path / "lost.yaml"
    sc_file.write_text(LOST_YAML)
    out = tmp_path / "b"
    assert main(["run", str(sc_file), "--out", str(out)]) == 2
    captured = capsys.readouterr()
    assert "aborted:" in captured.err
    summary = json.loads((out / "summary.json").read_text())
    assert "disconnected" in summary["aborted"]
    assert "connectivity-loss" in (out / "events.csv").read_text()
    # the partial log still has rows
    assert len((out / "trajectory.csv").read_text().splitlines()) > 100


def test_run_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["run", "nominal", "--duration", "0"]) == 0
    assert (tmp_path / "runs" / "nominal" / "trajectory.csv").is_file()


def test_run_backend_flag_matches_default(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "nominal", "--duration", "0.05", "--out", str(a)]) == 0
    assert main(
        ["run", "nominal", "--duration", "0.05", "--out", str(b), "--backend", "python"]
    ) == 0
    for name in ("trajectory.csv", "metrics.csv", "events.csv"):
        assert filecmp.cmp(a / name, b / name, shallow=False), name


# ---------------------------------------------------------------------------
# plot


def test_plot_renders_standard_files(tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["run", "single_obstacle", "--duration", "0.2", "--out", str(out)]) == 0
    assert main(["plot", str(out)]) == 0
    printed = capsys.readouterr().out.splitlines()[-5:]
    names = sorted(p.rsplit("/", 1)[-1] for p in printed)
    assert names == [
        "control.svg",
        "formation_error.svg",
        "min_distance.svg",
        "trajectory.svg",
        "velocity.svg",
    ]
    # obstacle outline drawn in the trajectory plot (gray fill)
    assert "#d1d1d1" in (out / "trajectory.svg").read_text()


def test_plot_single_point_bundle(tmp_path):
    out = tmp_path / "b"
    assert main(["run", "nominal", "--duration", "0", "--out", str(out)]) == 0
    assert main(["plot", str(out)]) == 0
    assert (out / "trajectory.svg").is_file()


def test_plot_missing_bundle_is_io_error(tmp_path, capsys):
    assert main(["plot", str(tmp_path / "nope")]) == 3
    assert "missing" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# batch


def test_batch_runs_multiple_scenarios(tmp_path):
    code = main(
        ["batch", "nominal", "no_tracking", "--duration", "0.02", "--out", str(tmp_path)]
    )
    assert code == 0
    assert (tmp_path / "nominal" / "summary.json").is_file()
    assert (tmp_path / "no_tracking" / "summary.json").is_file()


def test_batch_reports_worst_exit_code(tmp_path, capsys):
    sc_file = tmp_path / "lost.yaml"
    sc_file.write_text(LOST_YAML)
    code = main(
        ["batch", "nominal", str(sc_file), "--duration", "0.02", "--out", str(tmp_path / "o")]
    )
    assert code == 0  # too short for the edge to snap
    # at full duration the second scenario aborts and the batch reports it
    code = main(["batch", "nominal", str(sc_file), "--dt", "0.01", "--out", str(tmp_path / "o2")])
    assert code == 2
    assert "aborted:" in capsys.readouterr().err
