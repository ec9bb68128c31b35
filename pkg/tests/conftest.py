import numpy as np
import pytest

from tvspec import shapes
from tvspec.mesh import TriangleMesh
from tvspec.ops import build_operators


@pytest.fixture(scope="session")
def ico2():
    return TriangleMesh(*shapes.icosphere(2))


@pytest.fixture(scope="session")
def ico3():
    return TriangleMesh(*shapes.icosphere(3))


@pytest.fixture(scope="session")
def ico4():
    return TriangleMesh(*shapes.icosphere(4))


@pytest.fixture(scope="session")
def ico2_ops(ico2):
    return build_operators(ico2)


@pytest.fixture(scope="session")
def ico3_ops(ico3):
    return build_operators(ico3)


@pytest.fixture(scope="session")
def ico4_ops(ico4):
    return build_operators(ico4)


@pytest.fixture(scope="session")
def cube8():
    return TriangleMesh(*shapes.cube(8))


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def cap_eigenvalue(radius):
    return np.sin(radius) / (1.0 - np.cos(radius))
