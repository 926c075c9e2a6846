"""Arc-length gauge fixing and convergence diagnostics.

The circle map ``G_t(x0) = (2 pi / v_t) int_0^x0 V(x', t) dx'`` with
``v_t = int V`` straightens the meridian. Pulling the warping functions back
along its inverse gives ``fhat_i(y) = f_i(G_t^{-1}(y))`` on a uniform y-grid;
the flow converges when ``(v_t / 2pi) fhat_i -> 1`` for every i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import spectral
from .geometry import TripleState
from .spectral import TWO_PI

BISECTION_TOL = 1e-13


@dataclass(frozen=True)
class GaugeMap:
    t: float
    vt: float
    g_map: np.ndarray  # G_t at x_0..x_N, with g_map[0] = 0 and g_map[N] = 2pi


@dataclass(frozen=True)
class GaugeFrame:
    t: float
    vt: float
    g_map: np.ndarray
    x_of_y: np.ndarray  # G_t^{-1} at the uniform y-grid
    f_hat: tuple[np.ndarray, np.ndarray, np.ndarray]
    c_estimates: tuple[float, float, float]

    @property
    def scale(self) -> float:
        return self.vt / TWO_PI

    @property
    def c_times_v(self) -> tuple[float, float, float]:
        return tuple(self.scale * c for c in self.c_estimates)

    @property
    def dist_to_standard(self) -> float:
        return float(max(np.max(np.abs(self.scale * fh - 1.0)) for fh in self.f_hat))


def gauge_map(s: TripleState) -> GaugeMap:
    vt = spectral.integrate(s.V)
    g = spectral.cumulative_integral(s.V) * (TWO_PI / vt)
    g[-1] = TWO_PI
    return GaugeMap(s.t, vt, g)


def invert(s: TripleState, gm: GaugeMap, y: np.ndarray) -> np.ndarray:
    """Solve ``G_t(x) = y`` for each target.

    Each root is bracketed by the grid cell from ``gm.g_map``; the bracket is
    shrunk by Newton steps that fall inside it and by bisection otherwise,
    until it is narrower than ``BISECTION_TOL``. One Newton polish follows.
    """
    y = np.asarray(y, dtype=float)
    n = s.n
    xg = TWO_PI * np.arange(n + 1) / n
    G = spectral.antiderivative_evaluator(s.V)
    scale = TWO_PI / gm.vt

    def residual_and_slope(x):
        return scale * G(x) - y, scale * spectral.resample(s.V, x)

    idx = np.clip(np.searchsorted(gm.g_map, y, side="right") - 1, 0, n - 1)
    lo = xg[idx].copy()
    hi = xg[idx + 1].copy()
    x = 0.5 * (lo + hi)
    for _ in range(200):
        r, slope = residual_and_slope(x)
        newton = x - r / slope
        # an iterate on the root (to roundoff) collapses its own bracket
        done = (np.abs(r) <= 1e-15 * TWO_PI) | (np.abs(newton - x) <= 1e-16 * TWO_PI)
        lo = np.where(done | (r < 0), x, lo)
        hi = np.where(done | (r >= 0), x, hi)
        if np.max(hi - lo) <= BISECTION_TOL:
            break
        inside = (newton > lo) & (newton < hi)
        x = np.where(done, x, np.where(inside, newton, 0.5 * (lo + hi)))
    r, slope = residual_and_slope(x)
    x = x - r / slope
    x[y == 0.0] = 0.0
    return x


def pull_back(s: TripleState) -> GaugeFrame:
    gm = gauge_map(s)
    y = spectral.grid(s.n)
    x = invert(s, gm, y)
    f1 = spectral.resample(s.f1, x)
    f2 = spectral.resample(s.f2, x)
    f_hat = (f1, f2, 1.0 / (f1 * f2))
    return GaugeFrame(
        t=s.t,
        vt=gm.vt,
        g_map=gm.g_map,
        x_of_y=x,
        f_hat=f_hat,
        c_estimates=tuple(float(np.mean(fh)) for fh in f_hat),
    )


def roundtrip_error(s: TripleState, frame: GaugeFrame) -> float:
    """Max error of recovering ``f_i`` on the x-grid from ``fhat_i`` through ``G_t``."""
    y_of_x = frame.g_map[:-1]
    return float(
        max(
            np.max(np.abs(spectral.resample(fh, y_of_x) - fi))
            for fh, fi in zip(frame.f_hat, s.f)
        )
    )


@dataclass(frozen=True)
class ConvergenceRecord:
    t: float
    dist_to_standard: float
    c_times_v: tuple[float, float, float]


@dataclass(frozen=True)
class ConvergenceSummary:
    records: list[ConvergenceRecord]
    eventually_monotone: bool
    final_dist: float


def convergence_metrics(snapshots: Iterable) -> ConvergenceSummary:
    """Gauge-fixed distance to the standard triple at each snapshot.

    Accepts a :class:`~hsflow.flow.TrajectoryRecord` or any iterable of
    snapshots/states. The tail check looks at the second half of the series.
    """
    snaps = getattr(snapshots, "snapshots", snapshots)
    records = []
    for snap in snaps:
        state = getattr(snap, "state", snap)
        fr = pull_back(state)
        records.append(ConvergenceRecord(state.t, fr.dist_to_standard, fr.c_times_v))
    dists = np.array([r.dist_to_standard for r in records])
    tail = dists[len(dists) // 2 :]
    monotone = bool(np.all(np.diff(tail) <= 1e-12))
    return ConvergenceSummary(records, monotone, float(dists[-1]) if dists.size else float("nan"))
