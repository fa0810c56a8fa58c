import numpy as np
import pytest

from twostage.core import Instance, Resource, Task, TimeWindow, TransitionModel


def make_task(i, windows, duration=5, profit=1, lat=25.0, lon=110.0, energy=0.0, storage=0.0):
    """``windows`` maps resource id to a list of ``(start, end)`` pairs."""
    return Task(i, lat, lon, duration, profit,
                {j: tuple(TimeWindow(s, e) for s, e in ws) for j, ws in windows.items()},
                energy, storage)


def make_instance(tasks, horizons=((0, 600),), energy=150.0, storage=2000.0, transition=None):
    resources = [Resource(j, energy, storage, TimeWindow(*h)) for j, h in enumerate(horizons)]
    return Instance(tuple(tasks), tuple(resources), transition or TransitionModel())


def random_tiny_instance(rng: np.random.Generator, n=6, m=2, span=600, energy=150.0) -> Instance:
    """Small multi-resource instance with random windows; tasks may share locations."""
    per = span // m
    tasks = []
    for i in range(n):
        d = int(rng.integers(3, 9))
        windows = {}
        for j in range(m):
            if rng.random() < 0.7:
                lo = j * per
                length = int(rng.integers(max(d, 10), 60))
                s = int(rng.integers(lo, lo + per - length))
                windows[j] = [(s, s + length)]
        if not windows:
            j = int(rng.integers(m))
            windows[j] = [(j * per, j * per + 40)]
        tasks.append(make_task(i, windows, d, int(rng.integers(1, 11)),
                               float(rng.uniform(20, 30)), float(rng.uniform(108, 114)),
                               energy=0.1 * d, storage=1.0 * d))
    return make_instance(tasks, tuple((j * per, (j + 1) * per) for j in range(m)), energy=energy)


def finite_difference_check(net, x, y, h=1e-6):
    _, grads = net.loss_and_grads(x, y)
    worst = 0.0
    for p, g in zip(net.params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up, _ = net.loss_and_grads(x, y)
            p[idx] = old - h
            down, _ = net.loss_and_grads(x, y)
            p[idx] = old
            fd = (up - down) / (2 * h)
            scale = max(abs(fd), abs(g[idx]), 1e-6)
            worst = max(worst, abs(fd - g[idx]) / scale)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
