"""A-priori estimates checked against a computed trajectory.

Every check returns an :class:`EstimateVerdict` whose ``worst_margin`` is the
smallest slack seen (negative means the estimate was violated by that much).
A check passes when ``worst_margin >= -tolerance``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import spectral
from .flow import TrajectoryRecord, decay_bound
from .spectral import TWO_PI

DYNAMICS_TOL = 1e-6
IDENTITY_TOL = 1e-9
MONOTONE_TOL = 1e-10


@dataclass
class EstimateVerdict:
    name: str
    passed: bool
    worst_margin: float
    at_time: float
    tolerance: float
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


class _Margins:
    """Running minimum of named slack series, remembering where it occurred."""

    def __init__(self):
        self.value = np.inf
        self.time = float("nan")
        self.which = ""

    def add(self, which: str, slack, times) -> None:
        slack = np.asarray(slack, dtype=float)
        if slack.size == 0:
            return
        j = int(np.argmin(slack))
        if slack[j] < self.value:
            self.value = float(slack[j]) + 0.0  # no signed zeros in reports
            self.time = float(np.asarray(times)[j])
            self.which = which

    def verdict(self, name: str, tol: float, **details) -> EstimateVerdict:
        value = self.value if np.isfinite(self.value) else 0.0
        details.setdefault("limiting", self.which)
        return EstimateVerdict(name, bool(value >= -tol), value, self.time, tol, details)


def _step_slack(traj: TrajectoryRecord, key: str):
    worst = getattr(traj, "step_worst", {}).get(key, -np.inf)
    return np.array([-worst]) if np.isfinite(worst) else np.array([])


def check_decay(
    traj: TrajectoryRecord, tol: float = DYNAMICS_TOL, monotone_tol: float | None = None
) -> EstimateVerdict:
    """``max T(t) <= T0 / (1 + T0 t / 3)`` and ``max T`` non-increasing."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    monotone_tol = tol if monotone_tol is None else monotone_tol
    t = traj.times
    maxT = traj.maxT
    bound = decay_bound(maxT[0], t)
    m = _Margins()
    m.add("decay_bound", bound - maxT, t)
    v = m.verdict("decay", tol, T0=float(maxT[0]), final_max_T=float(maxT[-1]))
    mono = _Margins()
    mono.add("monotone_rows", maxT[:-1] - maxT[1:], t[1:])
    mono.add("monotone_steps", _step_slack(traj, "max_T_increase"), [t[-1]])
    if np.isfinite(mono.value):
        v.details["monotone_margin"] = mono.value
        if mono.value < -monotone_tol:
            v.passed = False
            if mono.value < v.worst_margin:
                v.worst_margin, v.at_time = mono.value, mono.time
                v.details["limiting"] = mono.which
    return v


def length_upper_bound(class_squares=None) -> float:
    """``(1 / (6 (2pi)^3)) sum_i [omega_i]^2 [T^4]``.

    Each simple-type class has ``[omega_i]^2 = 2 (2pi)^4`` unless other values
    are passed, giving ``2pi``.
    """
    if class_squares is None:
        class_squares = [2 * TWO_PI**4] * 3
    return float(sum(class_squares)) / (6 * TWO_PI**3)


def check_volume_bounds(traj: TrajectoryRecord, tol: float = IDENTITY_TOL) -> EstimateVerdict:
    """``l(0) <= l(t) <= l_bar`` for the meridian length; total volume non-decreasing."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    t = traj.times
    length = traj.meridianLength
    vol = traj.totalVolume
    upper = length_upper_bound()
    m = _Margins()
    m.add("lower", length - length[0], t)
    m.add("upper", upper - length, t)
    m.add("length_monotone", length[1:] - length[:-1], t[1:])
    m.add("volume_monotone", (vol[1:] - vol[:-1]) / TWO_PI**3, t[1:])
    m.add("length_steps", _step_slack(traj, "meridian_decrease"), [t[-1]])
    return m.verdict(
        "volume_bounds", tol, l_lower=float(length[0]), l_upper=upper, final_length=float(length[-1])
    )


def check_quasi_isometry(traj: TrajectoryRecord, tol: float = MONOTONE_TOL) -> EstimateVerdict:
    """``max f`` non-increasing and ``min f >= 1 / (max f(0))^2``."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    t = traj.times
    maxF = traj.maxF
    minF = traj.minF
    m = _Margins()
    m.add("max_f_monotone", maxF[:-1] - maxF[1:], t[1:])
    m.add("max_f_steps", _step_slack(traj, "max_f_increase"), [t[-1]])
    m.add("min_f_lower", minF - 1.0 / maxF[0] ** 2, t)
    return m.verdict(
        "quasi_isometry", tol, C_initial=float(maxF[0]), C_final=float(maxF[-1])
    )


def check_conservation(traj: TrajectoryRecord, tol: float = IDENTITY_TOL) -> EstimateVerdict:
    """``|int A_i - 2pi| <= tol`` at every snapshot."""
    if not traj.snapshots:
        raise ValueError("trajectory has no snapshots")
    times, gaps = [], []
    for snap in traj.snapshots:
        times.append(snap.t)
        gaps.append(max(abs(spectral.integrate(Ai) - TWO_PI) for Ai in snap.state.A))
    m = _Margins()
    m.add("normalization", -np.asarray(gaps), times)
    return m.verdict("conservation", tol, max_error=float(max(gaps)))


def check_all(traj: TrajectoryRecord, tolerances: dict | None = None) -> list[EstimateVerdict]:
    tol = {
        "decay": DYNAMICS_TOL,
        "monotone": MONOTONE_TOL,
        "volume": IDENTITY_TOL,
        "quasi_isometry": MONOTONE_TOL,
        "conservation": IDENTITY_TOL,
    }
    tol.update(tolerances or {})
    return [
        check_decay(traj, tol["decay"], tol["monotone"]),
        check_volume_bounds(traj, tol["volume"]),
        check_quasi_isometry(traj, tol["quasi_isometry"]),
        check_conservation(traj, tol["conservation"]),
    ]
