import numpy as np
import pytest

from shapeflow.meshes import CenterlineEncoding, NodalField
from shapeflow.primitives import box_grid, build_hierarchy, icosphere, tube_mesh

# one line per acceptance criterion, echoed after the run (see
# tests/test_acceptance.py); populated in execution order
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def unit_cube_grid():
    return box_grid((4, 4, 4))


@pytest.fixture(scope="session")
def sphere162():
    return icosphere(2)


@pytest.fixture(scope="session")
def tube():
    return tube_mesh(16, 12, radius=1.0, length=3.0)


@pytest.fixture(scope="session")
def small_hierarchy():
    return build_hierarchy(box_grid((2, 2, 2)), 3)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def toy_condition():
    return CenterlineEncoding([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], [1.0, 2.0])


def poiseuille_field(mesh, u_max=2.0, radius=1.0):
    r = np.linalg.norm(mesh.vertices[:, :2], axis=1)
    uz = u_max * (1.0 - (r / radius) ** 2)
    zeros = np.zeros_like(uz)
    return NodalField(mesh, np.stack([zeros, zeros, uz], axis=1), "m/s")
