import numpy as np
import pytest

from isosv.geometry import DiskChart, generate_disk_mesh
from isosv.spaces import VariantTag, build_dof_map, cell_maps_for

# filled by the acceptance suite, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


class Disk:
    """Mesh, maps and DOF map of a small disk problem."""

    def __init__(self, n_boundary, variant=VariantTag.ISO_PIOLA):
        self.chart = DiskChart()
        self.mesh = generate_disk_mesh(n_boundary, self.chart)
        self.variant = VariantTag.parse(variant)
        self.maps = cell_maps_for(self.mesh, self.chart, self.variant)
        self.dofs = build_dof_map(self.mesh)

    @property
    def curved_cells(self):
        return np.nonzero(self.maps.curved)[0]


@pytest.fixture(scope="session")
def disk16():
    return Disk(16)


@pytest.fixture(scope="session")
def disk24():
    return Disk(24)


@pytest.fixture(scope="session")
def disk24_affine():
    return Disk(24, VariantTag.AFFINE)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_curved_control(rng, h=0.2, bulge=0.15):
    """Control points of a shape-regular cell with one bowed edge (edge 0)."""
    ang = rng.uniform(0, 2 * np.pi)
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    base = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]) + rng.uniform(-0.15, 0.15, (3, 2))
    v = h * base @ rot.T + rng.uniform(-1, 1, 2)
    mids = np.array([0.5 * (v[1] + v[2]), 0.5 * (v[2] + v[0]), 0.5 * (v[0] + v[1])])
    e = v[2] - v[1]
    normal = np.array([e[1], -e[0]])
    mids[0] += bulge * rng.uniform(0.2, 1.0) * normal
    return np.vstack([v, mids])
