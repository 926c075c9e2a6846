"""Writers for run output. Every number is printed with 17 significant digits."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import gauge, geometry
from .flow import MONITOR_COLUMNS, TrajectoryRecord
from .geometry import TripleState
from .monitors import EstimateVerdict

SNAPSHOT_COLUMNS = ("x0", "f1", "f2", "V", "A1", "A2", "A3", "T", "R")
GAUGE_COLUMNS = ("x0", "G", "y", "x0_of_y", "fhat1", "fhat2", "fhat3")


def fmt(v) -> str:
    return f"{float(v):.17g}"


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n")


def write_monitors(path: Path, traj: TrajectoryRecord) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MONITOR_COLUMNS)
        for row in traj.rows():
            w.writerow([fmt(v) for v in row])


def _write_columns(path: Path, comments: list[str], names, columns) -> None:
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(" ".join(names) + "\n")
        for row in zip(*columns):
            fh.write(" ".join(fmt(v) for v in row) + "\n")


def write_snapshot(path: Path, s: TripleState) -> None:
    """Columns ``x0 f1 f2 V A1 A2 A3 T R``; the time is in a ``# t = ...`` comment."""
    T = geometry.torsion_quantity(s)
    R = geometry.curvature(s).scalar
    A1, A2, A3 = s.A
    _write_columns(
        path, [f"t = {fmt(s.t)}", f"n = {s.n}"], SNAPSHOT_COLUMNS, (s.x, s.f1, s.f2, s.V, A1, A2, A3, T, R)
    )


def read_snapshot(path: Path) -> TripleState:
    t = 0.0
    with open(path) as fh:
        line = fh.readline()
        while line.startswith("#"):
            if line.startswith("# t = "):
                t = float(line[6:])
            line = fh.readline()
        names = line.split()
        values = np.loadtxt(fh, ndmin=2)
    col = dict(zip(names, values.T))
    return TripleState(col["f1"], col["f2"], col["V"], t)


def write_gauge_frame(path: Path, s: TripleState) -> gauge.GaugeFrame:
    fr = gauge.pull_back(s)
    comments = [
        f"t = {fmt(fr.t)}",
        f"vt = {fmt(fr.vt)}",
        "c_estimates = " + " ".join(fmt(c) for c in fr.c_estimates),
        "c_times_v = " + " ".join(fmt(c) for c in fr.c_times_v),
        f"dist_to_standard = {fmt(fr.dist_to_standard)}",
    ]
    y = s.x
    _write_columns(path, comments, GAUGE_COLUMNS, (s.x, fr.g_map[:-1], y, fr.x_of_y, *fr.f_hat))
    return fr


def verdicts_document(verdicts: list[EstimateVerdict]) -> dict:
    return {
        "passed": all(v.passed for v in verdicts),
        "verdicts": [v.as_dict() for v in verdicts],
    }


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def inventory(out: Path, files: list[Path]) -> dict[str, str]:
    return {str(p.relative_to(out)): sha256(p) for p in sorted(files)}


def verify_manifest(out: Path) -> list[str]:
    """Names of files listed in ``manifest.json`` that are missing or altered."""
    man = json.loads((out / "manifest.json").read_text())
    bad = []
    for name, digest in man["files"].items():
        p = out / name
        if not p.is_file() or sha256(p) != digest:
            bad.append(name)
    return bad
