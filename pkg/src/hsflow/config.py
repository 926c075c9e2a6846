"""Run and sweep configuration files (TOML).

Run schema::

    [grid]
    n = 64
    [flow]
    t_end = 20.0
    cfl_safety = 0.25        # optional
    max_steps = 10000000     # optional
    [monitor]
    every = 0.01
    [snapshot]
    every = 1.0
    [potentials]
    1.modes = [{ k = 1, cos = 0.1, sin = 0.0 }]
    2.modes = []             # missing potentials default to zero
    [tolerances]             # optional, see hsflow.monitors
    decay = 1e-6

A sweep file has the same sections plus ``[sweep]``; see :class:`SweepConfig`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .flow import FlowConfig
from .geometry import InitialData, Mode

TOLERANCE_KEYS = ("decay", "monotone", "volume", "quasi_isometry", "conservation")

_SCHEMA = {
    "grid": {"n"},
    "flow": {"t_end", "cfl_safety", "max_steps"},
    "monitor": {"every"},
    "snapshot": {"every"},
    "potentials": {"1", "2", "3"},
    "tolerances": set(TOLERANCE_KEYS),
}


class ConfigError(ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(self.diagnostic())

    def diagnostic(self) -> str:
        where = self.path or "<config>"
        if self.line is not None:
            where = f"{where}:{self.line}"
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class RunConfig:
    initial: InitialData
    flow: FlowConfig
    tolerances: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


class _Locator:
    """Maps ``(table, key)`` to a line number in the source text."""

    _header = re.compile(r"^\s*\[\s*([^\]]+?)\s*\]")

    def __init__(self, text: str, path: str | None):
        self.lines = text.splitlines()
        self.path = path

    def line(self, table: str, key: str | None = None) -> int | None:
        current = ""
        header_line = None
        for no, raw in enumerate(self.lines, start=1):
            m = self._header.match(raw)
            if m:
                current = m.group(1).strip()
                if current == table and key is None:
                    return no
                if current == table:
                    header_line = no
                continue
            if key is None:
                continue
            stripped = raw.strip()
            if current == table and re.match(rf'^"?{re.escape(key)}"?\s*[.=]', stripped):
                return no
            if current == "" and re.match(rf"^{re.escape(table)}\.{re.escape(key)}\s*[.=]", stripped):
                return no
        return header_line

    def error(self, message: str, table: str, key: str | None = None) -> ConfigError:
        return ConfigError(message, self.path, self.line(table, key))


def _parse_text(text: str, path: str | None) -> tuple[dict, _Locator]:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed TOML: {exc}", path, int(m.group(1)) if m else None) from None
    return data, _Locator(text, path)


def _number(loc, table, key, value, *, integer=False, positive=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise loc.error(f"{table}.{key} must be a number, got {value!r}", table, key)
    if integer and not isinstance(value, int):
        raise loc.error(f"{table}.{key} must be an integer, got {value!r}", table, key)
    if positive and not value > 0:
        raise loc.error(f"{table}.{key} must be positive, got {value!r}", table, key)
    return value


def _table(loc, data, name, required=True) -> dict:
    if name not in data:
        if required:
            raise ConfigError(f"missing required table [{name}]", loc.path, None)
        return {}
    t = data[name]
    if not isinstance(t, dict):
        raise loc.error(f"{name} must be a table", name)
    unknown = set(t) - _SCHEMA[name]
    if unknown:
        key = sorted(unknown)[0]
        raise loc.error(f"unknown key {name}.{key}", name, key)
    return t


def _modes(loc, pot: dict) -> tuple:
    out = []
    for idx in ("1", "2", "3"):
        entry = pot.get(idx, {})
        if not isinstance(entry, dict) or set(entry) - {"modes"}:
            raise loc.error(f"potentials.{idx} must only contain 'modes'", "potentials", idx)
        modes = []
        for j, m in enumerate(entry.get("modes", [])):
            if not isinstance(m, dict) or "k" not in m or set(m) - {"k", "cos", "sin"}:
                raise loc.error(
                    f"potentials.{idx}.modes[{j}] must be {{k, cos, sin}}", "potentials", idx
                )
            k = m["k"]
            if isinstance(k, bool) or not isinstance(k, int) or k < 1:
                raise loc.error(f"potentials.{idx}.modes[{j}].k must be an integer >= 1", "potentials", idx)
            for c in ("cos", "sin"):
                v = m.get(c, 0.0)
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise loc.error(f"potentials.{idx}.modes[{j}].{c} must be a number", "potentials", idx)
            modes.append(Mode(k, float(m.get("cos", 0.0)), float(m.get("sin", 0.0))))
        out.append(tuple(modes))
    return tuple(out)


def build_run_config(data: dict, loc: _Locator) -> RunConfig:
    allowed = set(_SCHEMA) | {"sweep"}
    for name in data:
        if name not in allowed:
            raise loc.error(f"unknown table [{name}]", name)
    grid = _table(loc, data, "grid")
    fl = _table(loc, data, "flow")
    mon = _table(loc, data, "monitor")
    snap = _table(loc, data, "snapshot")
    pot = _table(loc, data, "potentials", required=False)
    tol = _table(loc, data, "tolerances", required=False)

    if "n" not in grid:
        raise loc.error("missing grid.n", "grid")
    n = _number(loc, "grid", "n", grid["n"], integer=True)
    if n < 8 or n % 2:
        raise loc.error(f"grid.n must be even and >= 8, got {n}", "grid", "n")
    for table, t, key in (("flow", fl, "t_end"), ("monitor", mon, "every"), ("snapshot", snap, "every")):
        if key not in t:
            raise loc.error(f"missing {table}.{key}", table)
        _number(loc, table, key, t[key])
    cfl = _number(loc, "flow", "cfl_safety", fl.get("cfl_safety", 0.25))
    if cfl > 1:
        raise loc.error(f"flow.cfl_safety must lie in (0, 1], got {cfl}", "flow", "cfl_safety")
    max_steps = _number(loc, "flow", "max_steps", fl.get("max_steps", 10_000_000), integer=True)
    tolerances = {k: float(_number(loc, "tolerances", k, v)) for k, v in tol.items()}

    modes = _modes(loc, pot)
    for idx, ms in enumerate(modes, start=1):
        for m in ms:
            if m.k >= n // 2:
                raise loc.error(
                    f"potentials.{idx}: wavenumber {m.k} must be below N/2 = {n // 2}",
                    "potentials",
                    str(idx),
                )
    flow_cfg = FlowConfig(
        t_end=float(fl["t_end"]),
        cfl_safety=float(cfl),
        max_steps=int(max_steps),
        snapshot_every=float(snap["every"]),
        monitor_every=float(mon["every"]),
    )
    return RunConfig(InitialData(n, modes), flow_cfg, tolerances, data)


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    data, loc = _parse_text(text, str(path))
    return build_run_config(data, loc)


@dataclass(frozen=True)
class SweepConfig:
    """A run config plus ``[sweep]``: one run per (mode, amplitude) pair.

    ``[sweep]`` keys: ``potential`` (1..3, default 1), ``modes`` (wavenumbers),
    ``amplitudes``, ``component`` ("cos" or "sin", default "cos") and
    ``workers`` (default 1). Each run adds its single mode to the base
    potentials.
    """

    base: dict
    potential: int
    modes: tuple[int, ...]
    amplitudes: tuple[float, ...]
    component: str = "cos"
    workers: int = 1
    path: str | None = None

    def runs(self) -> list[dict]:
        out = []
        for k in self.modes:
            for a in self.amplitudes:
                data = {key: (dict(v) if isinstance(v, dict) else v) for key, v in self.base.items()}
                pot = {i: {"modes": list(v.get("modes", []))} for i, v in data.get("potentials", {}).items()}
                entry = pot.setdefault(str(self.potential), {"modes": []})
                entry["modes"].append({"k": k, self.component: a})
                data["potentials"] = pot
                out.append({"potential": self.potential, "k": k, "amplitude": a, "data": data})
        return out


def load_sweep_config(path: str | Path) -> SweepConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    data, loc = _parse_text(text, str(path))
    sweep = data.get("sweep")
    if not isinstance(sweep, dict):
        raise ConfigError("missing required table [sweep]", str(path))
    unknown = set(sweep) - {"potential", "modes", "amplitudes", "component", "workers"}
    if unknown:
        key = sorted(unknown)[0]
        raise loc.error(f"unknown key sweep.{key}", "sweep", key)
    potential = sweep.get("potential", 1)
    if potential not in (1, 2, 3):
        raise loc.error("sweep.potential must be 1, 2 or 3", "sweep", "potential")
    component = sweep.get("component", "cos")
    if component not in ("cos", "sin"):
        raise loc.error("sweep.component must be 'cos' or 'sin'", "sweep", "component")
    modes = sweep.get("modes", [])
    amps = sweep.get("amplitudes", [])
    if not isinstance(modes, list) or not all(isinstance(k, int) and k >= 1 for k in modes):
        raise loc.error("sweep.modes must be a list of integers >= 1", "sweep", "modes")
    if not isinstance(amps, list) or not all(isinstance(a, (int, float)) for a in amps):
        raise loc.error("sweep.amplitudes must be a list of numbers", "sweep", "amplitudes")
    workers = _number(loc, "sweep", "workers", sweep.get("workers", 1), integer=True)
    base = {k: v for k, v in data.items() if k != "sweep"}
    # validate the shared sections once, with line numbers, before any run starts
    build_run_config(base, loc)
    return SweepConfig(base, potential, tuple(modes), tuple(float(a) for a in amps), component, workers, str(path))
