"""Time stepping of the reduced flow for ``(f_1, f_2, V)``.

The evolved system is

    d/dt f_i = (1/V) (f_i''/V - f_i' V'/V^2) - f_i T / 3,   i = 1, 2
    d/dt V   = T V / 3

with ``T = V^-2 sum_i ((log f_i)')^2``. ``V`` obeys an ODE at each point, so no
diffusion acts along it. The coefficient system for ``A_i = f_i V`` is kept as
a residual check only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import gauge, geometry, spectral
from .geometry import InitialData, TripleState

log = logging.getLogger(__name__)

MAX_HALVINGS = 10
_EVENT_SLACK = 1e-4  # relative overshoot of the CFL step allowed to land on an event


class RejectedStep(ArithmeticError):
    """A Runge-Kutta step produced a non-positive or non-finite field."""


class StepFailure(RuntimeError):
    """Positivity could not be restored by halving the step."""

    def __init__(self, message: str, state: TripleState, record: "TrajectoryRecord | None" = None):
        super().__init__(message)
        self.state = state
        self.record = record


@dataclass(frozen=True)
class FlowConfig:
    t_end: float
    cfl_safety: float = 0.25
    max_steps: int = 10_000_000
    snapshot_every: float = 1.0
    monitor_every: float = 0.1

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if not (self.snapshot_every > 0 and self.monitor_every > 0):
            raise ValueError("snapshot and monitor intervals must be positive")


def event_times(every: float, t_end: float) -> np.ndarray:
    """Multiples of ``every`` in ``[0, t_end]``, always ending at ``t_end``."""
    count = int(math.floor(t_end / every * (1 + 1e-12)))
    times = every * np.arange(count + 1)
    if t_end - times[-1] > 1e-12 * max(1.0, t_end):
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


# -- right-hand side -------------------------------------------------------------


def _rhs(f1, f2, V):
    n = V.size
    k = spectral.wavenumbers(n)
    ik = 1j * k
    ik[-1] = 0.0
    k2 = -(k**2)

    def d1(u):
        return np.fft.irfft(np.fft.rfft(u) * ik, n)

    def d12(u):
        uh = np.fft.rfft(u)
        return np.fft.irfft(uh * ik, n), np.fft.irfft(uh * k2, n)

    with np.errstate(invalid="ignore", divide="ignore"):
        l1 = d1(np.log(f1))
        l2 = d1(np.log(f2))
    T = (l1**2 + l2**2 + (l1 + l2) ** 2) / V**2
    dV_dx = d1(V)
    out = []
    for fi in (f1, f2):
        p, pp = d12(fi)
        out.append((pp / V - p * dV_dx / V**2) / V - fi * T / 3.0)
    out.append(T * V / 3.0)
    return out


def rhs(s: TripleState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivatives ``(df1, df2, dV)`` at state ``s``."""
    return tuple(_rhs(s.f1, s.f2, s.V))


def _diffusion_part(fi, V):
    p = spectral.derivative(fi)
    pp = spectral.derivative(fi, 2)
    dV = spectral.derivative(V)
    return (pp / V - p * dV / V**2) / V


def rhs_f3_consistency(s: TripleState) -> float:
    """Max gap between the closed-form and chain-rule evolutions of ``f_3``."""
    f3 = s.f3
    T = geometry.torsion_quantity(s)
    closed = _diffusion_part(f3, s.V) - f3 * T / 3.0
    df1, df2, _ = rhs(s)
    chain = -f3 * (df1 / s.f1 + df2 / s.f2)
    return float(np.max(np.abs(closed - chain)))


def coefficient_rates(s: TripleState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``d/dt A_i`` by the product rule applied to :func:`rhs`."""
    df1, df2, dV = rhs(s)
    f1, f2, f3 = s.f
    df3 = -f3 * (df1 / f1 + df2 / f2)
    return tuple(s.V * dfi + fi * dV for fi, dfi in zip((f1, f2, f3), (df1, df2, df3)))


def eqnA_residual(s: TripleState) -> float:
    """Max gap between ``d/dt A_i`` and ``((log(A_i/V))' A_i/V^2)'`` over i and grid."""
    worst = 0.0
    for Ai, rate in zip(s.A, coefficient_rates(s)):
        flux = spectral.derivative(geometry.torsion_flux(Ai, s.V))
        worst = max(worst, float(np.max(np.abs(rate - flux))))
    return worst


# -- stepping ---------------------------------------------------------------------


def cfl_dt(s: TripleState, cfl_safety: float = 0.25) -> float:
    """Explicit diffusion limit ``safety * (min V)^2 * dx^2 / 2``."""
    dx = spectral.TWO_PI / s.n
    return cfl_safety * float(s.V.min()) ** 2 * dx**2 / 2.0


def _rk4(y, dt):
    k1 = _rhs(*y)
    k2 = _rhs(*(u + 0.5 * dt * k for u, k in zip(y, k1)))
    k3 = _rhs(*(u + 0.5 * dt * k for u, k in zip(y, k2)))
    k4 = _rhs(*(u + dt * k for u, k in zip(y, k3)))
    return [u + dt / 6.0 * (a + 2 * b + 2 * c + d) for u, a, b, c, d in zip(y, k1, k2, k3, k4)]


def step(s: TripleState, dt: float) -> TripleState:
    """One classical RK4 step. Raises :class:`RejectedStep` on positivity loss."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    with np.errstate(all="ignore"):
        out = _rk4((s.f1, s.f2, s.V), dt)
    for name, u in zip(("f1", "f2", "V"), out):
        if not np.all(np.isfinite(u)) or np.any(u <= 0):
            raise RejectedStep(f"{name} lost positivity at t = {s.t + dt:.17g}")
    return TripleState(out[0], out[1], out[2], s.t + dt)


def advance(s: TripleState, dt: float) -> tuple[TripleState, float]:
    """Step with reject-and-halve; returns the new state and the dt used."""
    for _ in range(MAX_HALVINGS + 1):
        try:
            return step(s, dt), dt
        except RejectedStep as exc:
            log.info("step rejected (%s); halving dt=%.3g", exc, dt)
            dt *= 0.5
    raise StepFailure(
        f"positivity lost after {MAX_HALVINGS} halvings at t = {s.t:.17g}", s
    )


# -- trajectories -----------------------------------------------------------------


@dataclass
class Snapshot:
    state: TripleState
    k_integral: np.ndarray  # trapezoid integral of T V^2 over monitor times up to t

    @property
    def t(self) -> float:
        return self.state.t


MONITOR_COLUMNS = (
    "t",
    "dt",
    "max_T",
    "decay_bound",
    "min_V",
    "max_V",
    "meridian_len",
    "total_volume",
    "min_f",
    "max_f",
    "eqnA_residual",
    "v2_residual",
    "dist_to_standard",
)


STEP_MONOTONE = ("max_T_increase", "max_f_increase", "min_V_decrease", "meridian_decrease")


def step_stats(s: TripleState) -> tuple[float, float, float, float]:
    """``(max T, max f, min V, meridian length)`` for per-step monotonicity checks."""
    T = geometry.torsion_quantity(s)
    return (
        float(T.max()),
        float(max(fi.max() for fi in s.f)),
        float(s.V.min()),
        spectral.integrate(s.V),
    )


@dataclass
class TrajectoryRecord:
    """Scalar monitors at monitor times plus field snapshots."""

    columns: dict[str, list[float]] = field(
        default_factory=lambda: {c: [] for c in MONITOR_COLUMNS}
    )
    snapshots: list[Snapshot] = field(default_factory=list)
    complete: bool = True
    steps: int = 0
    rejected: int = 0
    n: int = 0
    # worst single-step violation of each monotone quantity (positive = violated)
    step_worst: dict[str, float] = field(
        default_factory=lambda: {k: -np.inf for k in STEP_MONOTONE}
    )

    def __getattr__(self, name):
        cols = self.__dict__.get("columns")
        if cols is not None and name in _ALIASES:
            return np.asarray(cols[_ALIASES[name]], dtype=float)
        raise AttributeError(name)

    def __len__(self) -> int:
        return len(self.columns["t"])

    def rows(self):
        return zip(*(self.columns[c] for c in MONITOR_COLUMNS))

    @property
    def initial_max_T(self) -> float:
        return self.columns["max_T"][0]


_ALIASES = {
    "times": "t",
    "dts": "dt",
    "maxT": "max_T",
    "decayBound": "decay_bound",
    "minV": "min_V",
    "maxV": "max_V",
    "meridianLength": "meridian_len",
    "totalVolume": "total_volume",
    "minF": "min_f",
    "maxF": "max_f",
    "eqnAResidual": "eqnA_residual",
    "v2Residual": "v2_residual",
    "distToStandard": "dist_to_standard",
}


def decay_bound(T0: float, t):
    """Upper bound ``T0 / (1 + T0 t / 3)`` on the maximum of ``T``."""
    return T0 / (1.0 + T0 * np.asarray(t) / 3.0)


class _Recorder:
    def __init__(self, s0: TripleState, with_gauge: bool):
        self.rec = TrajectoryRecord(n=s0.n)
        self.with_gauge = with_gauge
        self.V0sq = s0.V**2
        self.k_int = np.zeros(s0.n)
        self.last_t = None
        self.last_K = None
        self.T0 = None

    def monitor(self, s: TripleState, dt: float) -> None:
        T = geometry.torsion_quantity(s)
        K = T * s.V**2
        if self.last_t is not None:
            self.k_int = self.k_int + 0.5 * (s.t - self.last_t) * (K + self.last_K)
        self.last_t, self.last_K = s.t, K
        maxT = float(T.max())
        if self.T0 is None:
            self.T0 = maxT
        vol, length = geometry.volume_and_length(s)
        fs = s.f
        dist = gauge.pull_back(s).dist_to_standard if self.with_gauge else float("nan")
        row = (
            s.t,
            dt,
            maxT,
            float(decay_bound(self.T0, s.t)),
            float(s.V.min()),
            float(s.V.max()),
            length,
            vol,
            float(min(fi.min() for fi in fs)),
            float(max(fi.max() for fi in fs)),
            eqnA_residual(s),
            float(np.max(np.abs(s.V**2 - self.V0sq - 2.0 / 3.0 * self.k_int))),
            dist,
        )
        for c, v in zip(MONITOR_COLUMNS, row):
            self.rec.columns[c].append(float(v))

    def track(self, before, after) -> None:
        worst = self.rec.step_worst
        gaps = (after[0] - before[0], after[1] - before[1], before[2] - after[2], before[3] - after[3])
        for key, gap in zip(STEP_MONOTONE, gaps):
            worst[key] = max(worst[key], gap)

    def snapshot(self, s: TripleState) -> None:
        k_int = self.k_int.copy()
        if s.t != self.last_t:
            K = geometry.torsion_quantity(s) * s.V**2
            k_int += 0.5 * (s.t - self.last_t) * (K + self.last_K)
        self.rec.snapshots.append(Snapshot(s, k_int))


def run(
    d: InitialData | TripleState,
    cfg: FlowConfig,
    *,
    with_gauge: bool = True,
    progress=None,
) -> TrajectoryRecord:
    """Integrate from ``t = 0`` to ``cfg.t_end``.

    The step is the CFL limit, shortened so that every monitor and snapshot
    time is hit exactly. Exceeding ``cfg.max_steps`` returns a partial record
    with ``complete = False``.
    """
    s = geometry.from_potentials(d) if isinstance(d, InitialData) else d
    mon_times = event_times(cfg.monitor_every, cfg.t_end)
    snap_times = event_times(cfg.snapshot_every, cfg.t_end)
    rec = _Recorder(s, with_gauge)
    rec.monitor(s, 0.0)
    rec.snapshot(s)
    im, isn = 1, 1
    steps = 0
    stats = step_stats(s)
    while im < mon_times.size or isn < snap_times.size:
        if steps >= cfg.max_steps:
            log.warning("max_steps=%d reached at t=%.6g; record incomplete", cfg.max_steps, s.t)
            rec.rec.complete = False
            break
        target = min(
            mon_times[im] if im < mon_times.size else np.inf,
            snap_times[isn] if isn < snap_times.size else np.inf,
        )
        dt_cfl = cfl_dt(s, cfg.cfl_safety)
        remaining = target - s.t
        dt = remaining if remaining <= dt_cfl * (1 + _EVENT_SLACK) else dt_cfl
        try:
            new, used = advance(s, dt)
        except StepFailure as exc:
            exc.record = rec.rec
            raise
        if used < dt:
            rec.rec.rejected += 1
        steps += 1
        if used == dt and dt == remaining:
            new = new.with_time(target)
        s = new
        new_stats = step_stats(s)
        rec.track(stats, new_stats)
        stats = new_stats
        if im < mon_times.size and s.t == mon_times[im]:
            rec.monitor(s, used)
            im += 1
        if isn < snap_times.size and s.t == snap_times[isn]:
            rec.snapshot(s)
            isn += 1
        if progress is not None:
            progress(s)
    rec.rec.steps = steps
    return rec.rec


def v2_integral_residual(traj: TrajectoryRecord) -> float:
    """Max pointwise gap in ``V^2(t) = V^2(0) + (2/3) int_0^t T V^2 ds`` over snapshots."""
    if len(traj.snapshots) < 2:
        raise ValueError("need at least two snapshots")
    V0sq = traj.snapshots[0].state.V ** 2
    worst = 0.0
    for snap in traj.snapshots:
        gap = snap.state.V**2 - V0sq - 2.0 / 3.0 * snap.k_integral
        worst = max(worst, float(np.max(np.abs(gap))))
    return worst
