import numpy as np
import pytest

from mmimou.config import SimulationConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    """One site, few antennas: fast enough for per-test drops."""
    return SimulationConfig().replace(**{
        "layout.num_sites": 1, "scheduler.n_antennas": 16, "sim.drops": 3,
    })


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record a one-line acceptance verdict, shown in the terminal summary."""
    def record(name, passed, detail):
        _VERDICTS.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
