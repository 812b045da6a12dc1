import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from imtreg import SimConfig, build_space, build_triangulation, generate, pixel_grid

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


@pytest.fixture(scope="session")
def mesh2():
    return build_triangulation(UNIT_SQUARE, 2)


@pytest.fixture(scope="session")
def mesh32():
    return build_triangulation(UNIT_SQUARE, 32)


@pytest.fixture(scope="session")
def space2(mesh2):
    return build_space(mesh2, 5, 1)


@pytest.fixture(scope="session")
def space32(mesh32):
    return build_space(mesh32, 5, 1)


@pytest.fixture(scope="session")
def grid40():
    return pixel_grid((40, 40))


@pytest.fixture(scope="session")
def sim500():
    cfg = SimConfig(n=500, r=0.0, seed=20240809)
    data, truth = generate(cfg)
    return cfg, data, truth
