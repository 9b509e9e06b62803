import math

import pytest

from nonembed import assembly, bvp, mollify, ruled

K_STAR = 4
DELTA_DEFAULT = math.exp(-2.0 * K_STAR) / 2.0


@pytest.fixture(scope="session")
def selected4():
    return bvp.select_N(K_STAR, resolution=192)


@pytest.fixture(scope="session")
def tail4(selected4):
    return mollify.build_tail_v(selected4, DELTA_DEFAULT, grid_n=512)


@pytest.fixture(scope="session")
def gen_surface():
    return ruled.generate_surface(0.5, 0.05, seed=7)


@pytest.fixture(scope="session")
def pocket3():
    return assembly.build_g1(3, grid_n=1536)


@pytest.fixture(scope="session")
def mu8():
    return assembly.measure_mu_schedule(8)


@pytest.fixture(scope="session")
def stack8(mu8, tail4):
    return assembly.build_annulus_stack([1.0] * 8, 8, mu=mu8, tail=tail4)
