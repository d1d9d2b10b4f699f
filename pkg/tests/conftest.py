import numpy as np
import pytest

from hbadapt.mesh import Mesh
from hbadapt.problems import tensor_grid


def square_mesh() -> Mesh:
    """Unit square split along the diagonal (0,0)-(1,1), sides tagged 1..4."""
    v = [[0, 0], [1, 0], [1, 1], [0, 1]]
    t = [[0, 1, 2], [0, 2, 3]]
    e = [[0, 1], [1, 2], [2, 3], [3, 0]]
    return Mesh(v, t, [1, 1], e, [4, 3, 2, 1], [False] * 4)


def uniform_square(n: int) -> Mesh:
    g = np.linspace(0.0, 1.0, n + 1)
    return tensor_grid(g, g)


@pytest.fixture
def square():
    return square_mesh()


@pytest.fixture
def grid8():
    return uniform_square(8)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
