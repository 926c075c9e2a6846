"""Closed G2-structure on T^4 x T^3 induced by a simple-type triple.

With torus angles ``t_1, t_2, t_3`` the 3-form is

    phi = dt1^dt2^dt3 - sum_i dt_i ^ omega_i,
    omega_i = A_i dx0^dx_i + (1/2) eps_ijk dx_j^dx_k,

and its intrinsic torsion is ``sum_i dt_i ^ tau_i`` with ``tau_i = c_i dx_i``.
Forms are kept only as coefficient fields in the coframe ``{dt_i, dx_mu}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flow, geometry, spectral
from .geometry import TripleState

# (t-index, x-index, x-index) of each constant -1 slot dt_i ^ dx_j ^ dx_k
CONSTANT_SLOTS = ((1, 2, 3), (2, 3, 1), (3, 1, 2))


@dataclass(frozen=True)
class G2Coefficients:
    A: tuple[np.ndarray, np.ndarray, np.ndarray]  # phi has -A_i on dt_i ^ dx0 ^ dx_i
    torsion: tuple[np.ndarray, np.ndarray, np.ndarray]  # c_i on dt_i ^ dx_i

    def terms(self) -> dict[tuple[str, ...], object]:
        """Every nonzero coefficient of phi, keyed by its coframe wedge."""
        out: dict[tuple[str, ...], object] = {("t1", "t2", "t3"): 1.0}
        for i, Ai in enumerate(self.A, start=1):
            out[(f"t{i}", "x0", f"x{i}")] = -Ai
        for i, j, k in CONSTANT_SLOTS:
            out[(f"t{i}", f"x{j}", f"x{k}")] = -1.0
        return out


def lift(s: TripleState) -> G2Coefficients:
    return G2Coefficients(A=s.A, torsion=geometry.torsion_coefficients(s))


_ORDER = ("t1", "t2", "t3", "x0", "x1", "x2", "x3")


def canonical(slot: tuple[str, ...]) -> tuple[int, tuple[str, ...]]:
    """Sort a wedge of coframe labels; returns ``(sign, sorted slot)``, sign 0 if degenerate."""
    if len(set(slot)) < len(slot):
        return 0, slot
    pos = [_ORDER.index(s) for s in slot]
    sign = 1
    for a in range(len(pos)):
        for b in range(a + 1, len(pos)):
            if pos[a] > pos[b]:
                sign = -sign
    return sign, tuple(sorted(slot, key=_ORDER.index))


def d_x0(terms: dict) -> dict:
    """Exterior derivative of a form whose coefficients depend on ``x0`` only."""
    out: dict = {}
    for slot, coeff in terms.items():
        if np.ndim(coeff) == 0:
            continue
        sign, key = canonical(("x0",) + slot)
        if sign == 0:
            continue
        out[key] = out.get(key, 0.0) + sign * spectral.derivative(coeff)
    return out


def exterior_derivative(c: G2Coefficients) -> dict:
    """``d phi`` slot by slot. Empty for every simple-type lift (phi is closed)."""
    return d_x0(c.terms())


def torsion_form(c: G2Coefficients) -> dict:
    """The intrinsic torsion 2-form ``sum_i c_i dt_i ^ dx_i``."""
    return {(f"t{i}", f"x{i}"): ci for i, ci in enumerate(c.torsion, start=1)}


def laplacian_flow_residual(s: TripleState) -> float:
    """Max over slots and grid of ``|d/dt phi - d(tau)|``.

    Both sides are assembled in canonical coframe order; the only slots that
    appear are ``dt_i ^ dx0 ^ dx_i``.
    """
    c = lift(s)
    lhs = {}
    for i, rate in enumerate(flow.coefficient_rates(s), start=1):
        sign, key = canonical((f"t{i}", "x0", f"x{i}"))
        lhs[key] = -sign * rate
    rhs = d_x0(torsion_form(c))
    worst = 0.0
    for key in set(lhs) | set(rhs):
        gap = np.asarray(lhs.get(key, 0.0)) - np.asarray(rhs.get(key, 0.0))
        worst = max(worst, float(np.max(np.abs(gap))))
    return worst
