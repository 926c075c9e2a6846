"""Command-line front end.

    hsflow run --config <path> --out <dir>
    hsflow check [--n 32,64] [--config <path>]
    hsflow sweep --config <path> --out <dir>

Exit codes: 0 pass, 2 config error, 3 numerical failure, 4 verdict failure.
Log verbosity comes from the ``HSFLOW_LOG`` environment variable
(``DEBUG``, ``INFO``, ``WARNING``, ...).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, config, export, flow, geometry, identities, monitors
from .config import ConfigError, RunConfig

log = logging.getLogger("hsflow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERDICT = 4

CONVERGED_DIST = 1e-3
CONVERGED_C = 1e-4

SUMMARY_COLUMNS = (
    "run",
    "potential",
    "k",
    "amplitude",
    "status",
    "exit_code",
    "final_t",
    "final_max_T",
    "decay_margin",
    "final_dist_to_standard",
    "max_c_times_v_error",
    "converged",
    "message",
)


def _setup_logging() -> None:
    level = os.environ.get("HSFLOW_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _definiteness_diagnostic(exc: geometry.DefinitenessError, source: str | None, label: str) -> str:
    if source is None:
        return f"{label}: {exc}"
    line = None
    try:
        line = config._Locator(Path(source).read_text(), source).line("potentials", str(exc.index))
    except OSError:
        pass
    return ConfigError(str(exc), source, line).diagnostic()


def execute(
    rc: RunConfig, out: Path, source: str | None = None, label: str = "<config>"
) -> tuple[int, dict]:
    """Run one configuration into ``out``; returns ``(exit code, summary)``."""
    summary = {"status": "failed", "message": ""}
    try:
        s0 = geometry.from_potentials(rc.initial)
    except geometry.DefinitenessError as exc:
        msg = _definiteness_diagnostic(exc, source, label)
        print(msg, file=sys.stderr)
        summary["message"] = str(exc)
        summary["status"] = "config_error"
        return EXIT_CONFIG, summary

    out.mkdir(parents=True, exist_ok=True)
    (out / "snapshots").mkdir(exist_ok=True)
    (out / "gauge").mkdir(exist_ok=True)
    files: list[Path] = []
    start = time.perf_counter()
    failure = None
    try:
        traj = flow.run(s0, rc.flow, with_gauge=True)
    except (flow.StepFailure, FloatingPointError) as exc:
        failure = exc
        traj = getattr(exc, "record", None)

    mon_path = out / "monitors.csv"
    if traj is not None:
        export.write_monitors(mon_path, traj)
        files.append(mon_path)
        for j, snap in enumerate(traj.snapshots):
            p = out / "snapshots" / f"snapshot_{j:04d}.dat"
            export.write_snapshot(p, snap.state)
            files.append(p)
    wall = time.perf_counter() - start
    log.info("integration finished in %.3f s", wall)

    manifest = {
        "version": __version__,
        "config": rc.raw,
        "grid_size": rc.initial.n,
        "wall_time_s": wall,
    }
    if failure is not None or not traj.complete:
        if failure is not None:
            last = getattr(failure, "state", None)
            reason = str(failure)
        else:
            last = traj.snapshots[-1].state
            reason = f"max_steps = {rc.flow.max_steps} reached before t_end"
        if last is not None:
            p = out / "last_good_state.dat"
            export.write_snapshot(p, last)
            files.append(p)
        print(f"numerical failure: {reason}", file=sys.stderr)
        manifest.update(
            status="numerical_failure",
            message=reason,
            steps=None if traj is None else traj.steps,
            rejected_steps=None if traj is None else traj.rejected,
            files=export.inventory(out, files),
        )
        export.write_json(out / "manifest.json", manifest)
        summary["message"] = reason
        summary["status"] = "numerical_failure"
        return EXIT_NUMERICAL, summary

    frames = []
    for j, snap in enumerate(traj.snapshots):
        p = out / "gauge" / f"gauge_{j:04d}.dat"
        frames.append(export.write_gauge_frame(p, snap.state))
        files.append(p)
    verdicts = monitors.check_all(traj, rc.tolerances)
    vpath = out / "verdicts.json"
    export.write_json(vpath, export.verdicts_document(verdicts))
    files.append(vpath)
    passed = all(v.passed for v in verdicts)

    final = frames[-1]
    c_err = max(abs(c - 1.0) for c in final.c_times_v)
    manifest.update(
        status="pass" if passed else "verdict_failure",
        steps=traj.steps,
        rejected_steps=traj.rejected,
        monitor_rows=len(traj),
        snapshots=len(traj.snapshots),
        verdicts={v.name: v.passed for v in verdicts},
        files=export.inventory(out, files),
        wall_time_s=time.perf_counter() - start,
    )
    export.write_json(out / "manifest.json", manifest)

    decay = next(v for v in verdicts if v.name == "decay")
    summary.update(
        status="pass" if passed else "verdict_failure",
        final_t=traj.times[-1],
        final_max_T=traj.maxT[-1],
        decay_margin=decay.worst_margin,
        final_dist_to_standard=final.dist_to_standard,
        max_c_times_v_error=c_err,
        converged=bool(
            passed and final.dist_to_standard < CONVERGED_DIST and c_err < CONVERGED_C
        ),
        verdicts=verdicts,
    )
    return (EXIT_OK if passed else EXIT_VERDICT), summary


def cmd_run(config_path: str, out_dir: str) -> int:
    try:
        rc = config.load_run_config(config_path)
    except ConfigError as exc:
        print(exc.diagnostic(), file=sys.stderr)
        return EXIT_CONFIG
    code, summary = execute(rc, Path(out_dir), config_path)
    for v in summary.get("verdicts", []):
        flag = "PASS" if v.passed else "FAIL"
        print(
            f"{flag} {v.name} worst_margin={export.fmt(v.worst_margin)} "
            f"at_t={export.fmt(v.at_time)} tol={export.fmt(v.tolerance)}"
        )
    if "final_dist_to_standard" in summary:
        print(f"final_dist_to_standard={export.fmt(summary['final_dist_to_standard'])}")
        print(f"max_c_times_v_error={export.fmt(summary['max_c_times_v_error'])}")
    return code


def cmd_check(sizes: list[int]) -> int:
    results = identities.run_suite(sizes)
    print(f"{'identity':<20} {'N':>8} {'measured':>25} {'tolerance':>25} status")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<20} {r.n:>8} {export.fmt(r.measured):>25} {export.fmt(r.tolerance):>25} {status}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERDICT


def _sweep_job(job: dict) -> dict:
    out = Path(job["out"])
    row = {
        "run": job["run"],
        "potential": job["potential"],
        "k": job["k"],
        "amplitude": job["amplitude"],
    }
    try:
        rc = config.build_run_config(job["data"], config._Locator("", None))
    except (ConfigError, ValueError) as exc:
        return {**row, "status": "config_error", "exit_code": EXIT_CONFIG, "message": str(exc)}
    code, summary = execute(rc, out, label=f"{job['sweep']}: {job['run']}")
    summary.pop("verdicts", None)
    return {**row, **summary, "exit_code": code}


def cmd_sweep(config_path: str, out_dir: str) -> int:
    try:
        sc = config.load_sweep_config(config_path)
    except ConfigError as exc:
        print(exc.diagnostic(), file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for j, run in enumerate(sc.runs()):
        name = f"run_{j:03d}"
        jobs.append({**run, "run": name, "out": str(out / name), "sweep": sc.path})
    if sc.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(sc.workers, len(jobs))) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(job) for job in jobs]

    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            cells = []
            for c in SUMMARY_COLUMNS:
                v = row.get(c, "")
                if isinstance(v, (float, np.floating)):
                    v = export.fmt(v)
                cells.append(v)
            w.writerow(cells)
    for row in rows:
        print(f"{row['run']} k={row['k']} amplitude={export.fmt(row['amplitude'])} {row['status']}")
    codes = [row["exit_code"] for row in rows if row["exit_code"] != EXIT_OK]
    return max(codes) if codes else EXIT_OK


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")
    if not sizes or any(n < 8 or n % 2 for n in sizes):
        raise argparse.ArgumentTypeError("grid sizes must be even integers >= 8")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hsflow", description="Simple-type hypersymplectic flow on T^4")
    ap.add_argument("--version", action="version", version=f"hsflow {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configuration and check the estimates")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("check", help="run the discrete identity suite")
    p.add_argument("--n", type=_sizes, default=None, help="grid sizes, e.g. 32,64 (default)")
    p.add_argument("--config", default=None, help="take the grid size from a run config")

    p = sub.add_parser("sweep", help="run a grid of configurations")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "check":
        sizes = args.n
        if sizes is None and args.config is not None:
            try:
                sizes = [config.load_run_config(args.config).initial.n]
            except ConfigError as exc:
                print(exc.diagnostic(), file=sys.stderr)
                return EXIT_CONFIG
        return cmd_check(sizes or [32, 64])
    return cmd_sweep(args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
