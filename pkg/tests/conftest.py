import numpy as np
import pytest

from tentlab.presets import CommonGraphs, CommonSpaces
from tentlab.space import load_space
from tentlab.spectral import build_operator
from tentlab.tent import TentFunction, TGrid
from tentlab.weights import generate_weight


@pytest.fixture(name="line")
def line_fixture():
    """Points 0..9 on the line with unit masses."""
    return load_space(CommonSpaces.grid_1d(10))


@pytest.fixture(name="lattice")
def lattice_fixture():
    return load_space(CommonSpaces.grid_2d(8, 8))


@pytest.fixture(name="cloud")
def cloud_fixture():
    return load_space(CommonSpaces.random_cloud(30, seed=3, random_measure=True))


@pytest.fixture(name="point")
def point_fixture():
    return load_space(CommonSpaces.single_point())


@pytest.fixture(name="power_weight")
def power_weight_fixture(line):
    return generate_weight(line, "power", {"a": 0.5, "center": 0})


@pytest.fixture(name="grid")
def grid_fixture(line):
    return TGrid.from_space(line)


@pytest.fixture(name="random_tent")
def random_tent_fixture(line, grid):
    rng = np.random.default_rng(11)
    shape = (line.n_points, grid.count)
    values = rng.standard_normal(shape) * (rng.random(shape) < 0.4)
    return TentFunction(grid, values)


@pytest.fixture(name="path_operator")
def path_operator_fixture():
    space = load_space(CommonSpaces.grid_1d(16))
    return build_operator(space, CommonGraphs.path())
