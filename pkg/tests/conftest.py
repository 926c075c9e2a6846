import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from hsflow import flow, geometry
from hsflow.geometry import InitialData, Mode

settings.register_profile(
    "hsflow", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("hsflow")


def cosine_data(n=64, amplitude=0.1, k=1):
    return InitialData.single_mode(n, 1, k, cos=amplitude)


@st.composite
def initial_data(draw, n=64, kmax=4, max_deviation=0.6):
    """Band-limited potentials with ``sum k^2 (|a| + |b|) <= max_deviation`` per potential."""
    pots = []
    for _ in range(3):
        count = draw(st.integers(0, kmax))
        ks = draw(st.lists(st.integers(1, kmax), min_size=count, max_size=count, unique=True))
        raw = [
            (draw(st.floats(-1, 1)), draw(st.floats(-1, 1)))
            for _ in ks
        ]
        total = sum(k * k * (abs(a) + abs(b)) for k, (a, b) in zip(ks, raw))
        scale = draw(st.floats(0.0, max_deviation)) / total if total > 1e-6 else 0.0
        pots.append(tuple(Mode(k, a * scale, b * scale) for k, (a, b) in zip(ks, raw)))
    return InitialData(n, tuple(pots))


@pytest.fixture(scope="session")
def long_run():
    """The reference small-data trajectory: cosine mode, N = 64, t in [0, 20]."""
    cfg = flow.FlowConfig(t_end=20.0, cfl_safety=0.25, snapshot_every=1.0, monitor_every=0.01)
    start = time.perf_counter()
    traj = flow.run(cosine_data(), cfg)
    traj.wall_time = time.perf_counter() - start
    return traj


@pytest.fixture(scope="session")
def short_run():
    cfg = flow.FlowConfig(t_end=2.0, snapshot_every=0.5, monitor_every=0.1)
    return flow.run(cosine_data(n=32, amplitude=0.2), cfg)


@pytest.fixture(scope="session")
def flat_run():
    cfg = flow.FlowConfig(t_end=1.0, snapshot_every=0.5, monitor_every=0.1)
    return flow.run(InitialData(64, ((), (), ())), cfg)


@pytest.fixture
def seeded_states():
    return [geometry.from_potentials(geometry.random_initial_data(64, seed)) for seed in range(10)]


def grid_max(a):
    return float(np.max(np.abs(a)))


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
