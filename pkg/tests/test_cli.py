import json
import os
import subprocess
import sys

import numpy as np
import pytest

from thermoshell.cli import main
from thermoshell.simulator import TELEMETRY_COLUMNS, TimeSeries

SCENARIOS = os.path.join(os.path.dirname(__file__), os.pardir, "src", "thermoshell", "scenarios")


def scenario(name):
    return os.path.join(SCENARIOS, name)


@pytest.fixture
def short(tmp_path):
    path = tmp_path / "short.ini"
    path.write_text("[profile]\nduration = 20\n")
    return str(path)


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_simulate_writes_artifacts(tmp_path, short):
    out = tmp_path / "out"
    assert main(["simulate", "--config", scenario("hand_disturbance.ini"), "--config", short,
                 "--out", str(out)]) == 0
    run = out / "hand_disturbance"
    for name in ("telemetry.csv", "mpc_diagnostics.csv", "summary.json", "config.ini", "manifest.json"):
        assert (run / name).is_file()
    ts = TimeSeries.from_csv(run / "telemetry.csv")
    assert ts.columns == TELEMETRY_COLUMNS
    assert len(ts) == 40
    summary = json.loads((run / "summary.json").read_text())
    assert summary["violations"] == 0
    assert summary["bounds"] == [12.0, 77.0, 0.0, 5.0]
    # wall-clock data stays out of the deterministic outputs
    assert "elapsed_s" in json.loads((run / "manifest.json").read_text())
    assert "elapsed" not in (run / "summary.json").read_text()


def test_output_root_from_environment(tmp_path, short, monkeypatch):
    monkeypatch.setenv("THERMOSHELL_OUT", str(tmp_path / "env"))
    assert main(["simulate", "--config", short]) == 0
    assert (tmp_path / "env" / "scenario" / "telemetry.csv").is_file()


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[mpc]\nhorizn = 3\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    record = _error(capsys)
    assert record["exit_code"] == 2 and record["key"] == "mpc.horizn" and record["line"] == 2


def test_invariant_violation_exit_code(tmp_path, capsys):
    # an open-loop level above the actuator ceiling is clamped by the plant but
    # recorded as commanded, so the telemetry check must flag it
    cfg = tmp_path / "over.ini"
    cfg.write_text("[controller]\nkind = open_loop\nopen_loop_levels = 90\n[profile]\nduration = 5\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    assert _error(capsys)["error"] == "InvariantViolation"


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "touch.ini"
    cfg.write_text("[capsense]\nprotocol = grasp\nquiet = 5\nduration = 60\n")
    assert main(["capsense", "--config", str(cfg), "--out", str(tmp_path)]) == 4
    assert _error(capsys)["error"] == "CalibrationRejected"


def test_other_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "stream.ini"
    cfg.write_text("[capsense]\nstream = missing.csv\n")
    assert main(["capsense", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert _error(capsys)["exit_code"] == 1


def test_capsense_replay(tmp_path):
    from thermoshell.capsense import synthetic_stream, write_stream_csv

    t, raw = synthetic_stream("foam_channels_gel_water", 60.0, contacts=[(30.0, 40.0)], seed=5)
    write_stream_csv(tmp_path / "rec.csv", t, raw)
    cfg = tmp_path / "replay.ini"
    cfg.write_text("[capsense]\nstream = rec.csv\n[output]\nname = replay\n")
    assert main(["capsense", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "replay" / "capsense.csv").read_text().splitlines()
    assert rows[0] == "t_s,normalized,contact_flag"
    flags = np.array([int(r.split(",")[2]) for r in rows[1:]])
    assert flags[(t >= 30.5) & (t < 40.0)].all()
    assert not flags[t < 30.0].any()


def test_calibrate_writes_parameter_file(tmp_path):
    assert main(["calibrate", "--config", scenario("crossover.ini"), "--out", str(tmp_path), "--traces"]) == 0
    run = tmp_path / "crossover"
    from thermoshell.calibration import read_parameters_file

    params = read_parameters_file(run / "calibrated.params")
    assert params.tank_volume > 0
    for name in ("calibration_report.txt", "calibration_history.csv", "trace_water_step.csv",
                 "trace_cover_step.csv"):
        assert (run / name).is_file()


def test_jobs_runs_each_config_separately(tmp_path):
    a, b = tmp_path / "a.ini", tmp_path / "b.ini"
    a.write_text("[profile]\nduration = 5\n[output]\nname = a\n")
    b.write_text("[profile]\nduration = 5\nkind = constant\nmean = 30\n[output]\nname = b\n")
    assert main(["simulate", "--jobs", "2", "--config", str(a), "--config", str(b), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "a" / "telemetry.csv").is_file() and (tmp_path / "b" / "telemetry.csv").is_file()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "thermoshell", "simulate", "--config", "/nonexistent.ini",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr.strip())["error"] == "ConfigError"
