import numpy as np
import pytest

from lnslab.grid import Grid, VectorField3


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid():
    return Grid(16, 2 * np.pi)


def random_field(grid: Grid, rng, scale: float = 1.0) -> VectorField3:
    return VectorField3(grid, scale * rng.standard_normal((3,) + grid.shape))


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            for name, value in rep.user_properties:
                if name == "acceptance":
                    lines.append(value)
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
