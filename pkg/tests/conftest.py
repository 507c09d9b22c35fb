import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geosurf.generators import euclidean_grid, snowflake_grid, tree  # noqa: E402
from geosurf.space import MetricSurface  # noqa: E402


def path_graph(k, w=1.0):
    return MetricSurface(k, [(i, i + 1, w) for i in range(k - 1)], origin=0)


@pytest.fixture(scope="session")
def grid5():
    return euclidean_grid(5)


@pytest.fixture(scope="session")
def grid7():
    return euclidean_grid(7)


@pytest.fixture(scope="session")
def grid33():
    return euclidean_grid(33)


@pytest.fixture(scope="session")
def grid65():
    return euclidean_grid(65)


@pytest.fixture(scope="session")
def bintree():
    return tree(2, 4)


@pytest.fixture(scope="session")
def snow():
    return snowflake_grid(9, 1.0, 0.5)
