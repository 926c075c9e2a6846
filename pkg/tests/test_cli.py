import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hsflow import cli, config, export, flow, geometry
from hsflow.spectral import TWO_PI

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

SMALL = """
[grid]
n = 32
[flow]
t_end = 1.0
[monitor]
every = 0.1
[snapshot]
every = 0.5
[potentials]
1.modes = [{ k = 1, cos = 0.1 }]
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_monitors(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_flat_config(tmp_path, capsys):
    out = tmp_path / "flat"
    assert cli.main(["run", "--config", str(CONFIGS / "flat.toml"), "--out", str(out)]) == 0
    header, rows = read_monitors(out / "monitors.csv")
    assert tuple(header) == flow.MONITOR_COLUMNS
    assert len(rows) == len(flow.event_times(0.5, 5.0))
    for name in ("max_T", "min_V", "max_V", "meridian_len", "min_f", "max_f", "dist_to_standard"):
        col = rows[:, header.index(name)]
        assert np.all(col == col[0])
    assert rows[0, header.index("meridian_len")] == pytest.approx(TWO_PI, abs=1e-15)
    assert export.verify_manifest(out) == []
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "pass" and man["grid_size"] == 64
    assert "PASS decay" in capsys.readouterr().out


def test_example_config_end_to_end(tmp_path):
    out = tmp_path / "example"
    assert cli.main(["run", "--config", str(CONFIGS / "example.toml"), "--out", str(out)]) == 0
    verdicts = json.loads((out / "verdicts.json").read_text())
    assert verdicts["passed"]
    decay = next(v for v in verdicts["verdicts"] if v["name"] == "decay")
    assert decay["passed"]
    header, rows = read_monitors(out / "monitors.csv")
    assert len(rows) == 2001
    assert rows[-1, header.index("dist_to_standard")] < 1e-3
    assert len(list((out / "snapshots").iterdir())) == 21
    assert len(list((out / "gauge").iterdir())) == 21
    assert export.verify_manifest(out) == []


def test_indefinite_config_is_a_config_error(tmp_path, capsys):
    code = cli.main(["run", "--config", str(CONFIGS / "indefinite.toml"), "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "definiteness" in err and "A_1" in err
    assert "indefinite.toml:15:" in err


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[grid]\nn = 32\n[flow\nt_end = 1\n", 3, "malformed"),
        (SMALL.replace("n = 32", "n = 31"), 3, "even"),
        (SMALL.replace("t_end = 1.0", "t_end = -1.0"), 5, "positive"),
        (SMALL.replace("every = 0.1", "every = 'often'"), 7, "number"),
        (SMALL + "[extra]\nfoo = 1\n", 12, "unknown table"),
        (SMALL.replace("[flow]", "[flow]\nspeed = 3"), 5, "unknown key flow.speed"),
        (SMALL.replace("k = 1", "k = 40"), 11, "wavenumber"),
        (SMALL.replace("cos = 0.1", "cos = 0.1, tan = 1"), 11, "k, cos, sin"),
    ],
)
def test_invalid_config_reports_line(tmp_path, capsys, text, line, fragment):
    p = write(tmp_path, text)
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert f"run.toml:{line}:" in err
    assert fragment in err


def test_missing_table_and_file(tmp_path, capsys):
    p = write(tmp_path, "[grid]\nn = 32\n")
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "missing required table [flow]" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "o")]) == 2


def test_config_parsing_values(tmp_path):
    rc = config.load_run_config(CONFIGS / "example.toml")
    assert rc.initial.n == 64
    assert rc.initial.modes[0][0].k == 1 and rc.initial.modes[0][0].cos == 0.1
    assert rc.flow.t_end == 20.0 and rc.flow.cfl_safety == 0.25
    assert rc.flow.monitor_every == 0.01 and rc.flow.snapshot_every == 1.0
    assert rc.tolerances["decay"] == 1e-6


def test_monitor_csv_is_byte_identical(tmp_path):
    p = write(tmp_path, SMALL)
    for name in ("a", "b"):
        assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / name)]) == 0
    for rel in ("monitors.csv", "verdicts.json", "snapshots/snapshot_0002.dat", "gauge/gauge_0002.dat"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_snapshot_format_round_trip(tmp_path):
    s = geometry.from_potentials(geometry.random_initial_data(32, 3)).with_time(0.75)
    p = tmp_path / "s.dat"
    export.write_snapshot(p, s)
    lines = p.read_text().splitlines()
    assert lines[0] == "# t = 0.75"
    assert lines[2].split() == list(export.SNAPSHOT_COLUMNS)
    assert len(lines) == 3 + 32
    back = export.read_snapshot(p)
    assert back.t == 0.75
    for a, b in ((back.f1, s.f1), (back.f2, s.f2), (back.V, s.V)):
        assert np.array_equal(a, b)  # 17 significant digits round-trip exactly


def test_numerical_failure_dumps_last_good_state(tmp_path, monkeypatch, capsys):
    real = flow.step
    count = {"n": 0}

    def flaky(s, dt):
        count["n"] += 1
        if count["n"] > 20:
            raise flow.RejectedStep("forced")
        return real(s, dt)

    monkeypatch.setattr(flow, "step", flaky)
    p = write(tmp_path, SMALL)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(p), "--out", str(out)]) == 3
    assert "numerical failure" in capsys.readouterr().err
    last = export.read_snapshot(out / "last_good_state.dat")
    assert last.t > 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "numerical_failure"
    assert export.verify_manifest(out) == []


def test_max_steps_is_a_numerical_failure(tmp_path):
    p = write(tmp_path, SMALL.replace("t_end = 1.0", "t_end = 1.0\nmax_steps = 5"))
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(p), "--out", str(out)]) == 3
    assert (out / "last_good_state.dat").is_file()


def test_verdict_failure_exit_code(tmp_path, monkeypatch):
    from hsflow import monitors

    def failing(traj, tolerances=None):
        return [monitors.EstimateVerdict("decay", False, -1.0, 0.5, 1e-6)]

    monkeypatch.setattr(monitors, "check_all", failing)
    p = write(tmp_path, SMALL)
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 4


def test_check_command(capsys):
    assert cli.main(["check", "--n", "32,64"]) == 0
    out = capsys.readouterr().out
    assert "scalar_curvature" in out and "eqnA_decay_ratio" in out
    assert "FAIL" not in out
    rows = {(ln.split()[0], ln.split()[1]): float(ln.split()[2]) for ln in out.splitlines()[1:]}
    assert rows[("scalar_curvature", "64")] < 1e-10


def test_check_uses_config_grid(capsys):
    assert cli.main(["check", "--config", str(CONFIGS / "flat.toml")]) == 0
    out = capsys.readouterr().out
    assert all(ln.split()[1] == "64" for ln in out.splitlines()[1:])


def test_check_rejects_bad_sizes():
    with pytest.raises(SystemExit) as err:
        cli.main(["check", "--n", "31"])
    assert err.value.code == 2


SWEEP = """
[sweep]
modes = [1]
amplitudes = [0.05, 2.0, 0.1]
workers = 2
[grid]
n = 32
[flow]
t_end = 1.0
[monitor]
every = 0.25
[snapshot]
every = 0.5
"""


def read_summary(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sweep_flags_failed_row(tmp_path):
    p = write(tmp_path, SWEEP, "sweep.toml")
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", str(p), "--out", str(out)]) != 0
    rows = read_summary(out / "summary.csv")
    assert [r["status"] for r in rows] == ["pass", "config_error", "pass"]
    assert "definiteness" in rows[1]["message"]
    assert (out / "run_000" / "monitors.csv").is_file() and not (out / "run_001").exists()


def test_empty_sweep(tmp_path):
    p = write(tmp_path, SWEEP.replace("[0.05, 2.0, 0.1]", "[]"), "sweep.toml")
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", str(p), "--out", str(out)]) == 0
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines == [",".join(cli.SUMMARY_COLUMNS)]


def test_sweep_config_errors(tmp_path, capsys):
    p = write(tmp_path, SWEEP.replace("workers = 2", "workers = 2\nspeed = 1"), "sweep.toml")
    assert cli.main(["sweep", "--config", str(p), "--out", str(tmp_path / "sw")]) == 2
    assert "sweep.toml:6:" in capsys.readouterr().err
    p = write(tmp_path, SMALL, "nosweep.toml")
    assert cli.main(["sweep", "--config", str(p), "--out", str(tmp_path / "sw")]) == 2


def test_shipped_sweep_converges(tmp_path):
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", str(CONFIGS / "sweep.toml"), "--out", str(out)]) == 0
    rows = read_summary(out / "summary.csv")
    assert [float(r["amplitude"]) for r in rows] == [0.05, 0.1, 0.2]
    assert all(r["converged"] == "True" for r in rows)
    assert all(float(r["final_dist_to_standard"]) < 1e-3 for r in rows)


def test_console_script_and_log_env(tmp_path):
    env = dict(os.environ, HSFLOW_LOG="INFO")
    p = write(tmp_path, SMALL)
    res = subprocess.run(
        [sys.executable, "-m", "hsflow", "run", "--config", str(p), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
        env=env,
    )
    assert res.returncode == 0
    assert "INFO hsflow" in res.stderr
    res = subprocess.run([sys.executable, "-m", "hsflow", "--version"], capture_output=True, text=True)
    assert res.stdout.strip() == "hsflow 0.1.0"


def test_numbers_printed_with_17_digits():
    assert export.fmt(0.1) == "0.10000000000000001"
    assert float(export.fmt(np.pi)) == np.pi
