import numpy as np
import pytest

from fracgap.energy import ExteriorDatum
from fracgap.geometry import FarField, build_grid
from fracgap.regions import Interval

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def benchmark_datum(h: float = 2.0**-8, L: float = 4.0) -> ExteriorDatum:
    """Domain (-1, 1) in the box [-L, L], exterior datum sign(x)."""
    n = int(round(2 * L / h))
    grid = build_grid((-L, L), n, Interval(-1, 1), R=L)
    return ExteriorDatum.sample(grid, lambda p: np.sign(p[:, 0]), FarField(-1.0, 1.0, (1.0,), 0.0))


def constant_datum(c: float, h: float = 2.0**-5, L: float = 2.0) -> ExteriorDatum:
    n = int(round(2 * L / h))
    grid = build_grid((-L, L), n, Interval(-1, 1), R=L)
    return ExteriorDatum.constant(grid, c)


@pytest.fixture(scope="session")
def bench_g():
    return benchmark_datum()


@pytest.fixture(scope="session")
def bench_g64():
    return benchmark_datum(1 / 64)


@pytest.fixture(scope="session")
def bench_g32():
    return benchmark_datum(1 / 32)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
