import numpy as np
import pytest

from forchheimer_afem.mesh import DomainSpec, Mesh, build_initial_mesh

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def random_triangles(n, seed=0):
    """Counterclockwise, reasonably shaped random triangles."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        t = rng.uniform(-2.0, 2.0, size=(3, 2))
        d1, d2 = t[1] - t[0], t[2] - t[0]
        a = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
        if abs(a) < 0.3:
            continue
        if a < 0:
            t = t[[0, 2, 1]]
        out.append(t)
    return np.array(out)


@pytest.fixture
def two_triangles():
    return Mesh(UNIT_SQUARE.copy(), np.array([[0, 1, 2], [0, 2, 3]]), polygon=UNIT_SQUARE.copy())


@pytest.fixture(scope="session")
def square_mesh():
    return build_initial_mesh(DomainSpec("unit_square"))


@pytest.fixture(scope="session")
def l_mesh():
    return build_initial_mesh(DomainSpec("l_shape"))


@pytest.fixture(scope="session")
def t_mesh():
    return build_initial_mesh(DomainSpec("t_shape"))


def hexagon_mesh():
    ang = np.arange(6) * np.pi / 3
    ring = np.column_stack([np.cos(ang), np.sin(ang)])
    verts = np.vstack([[0.0, 0.0], ring])
    tris = np.array([[0, 1 + k, 1 + (k + 1) % 6] for k in range(6)])
    return Mesh(verts, tris, polygon=ring)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
