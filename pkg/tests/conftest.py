import numpy as np
import pytest
from hypothesis import settings

from finslerjet.gallery import NavigationData, build_thm2iic, build_thm3, cor51_build, cor51_navigation, sample_xy
from finslerjet.phiode import ABParams

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

SQUARE = ABParams(2.0, 0.0, -3.0, 2.0)
NAV = NavigationData(1.0, 0.5, (0.2, 0.1, 0.0))


@pytest.fixture(scope="session")
def square_params():
    return SQUARE


@pytest.fixture(scope="session")
def nav():
    return NAV


@pytest.fixture(scope="session")
def square_family():
    return build_thm2iic(NAV, SQUARE, "explicit")


@pytest.fixture(scope="session")
def square_remark_family():
    return build_thm2iic(NAV, SQUARE, "remark")


@pytest.fixture(scope="session")
def general_family():
    return build_thm2iic(NAV, ABParams(1.0, 0.5, -0.5, 0.3), "explicit")


@pytest.fixture(scope="session")
def thm3_plus():
    return build_thm3(NavigationData(2.0, 0.8, (0.1, -0.2, 0.3)), 2.0, 1)


@pytest.fixture(scope="session")
def thm3_minus():
    return build_thm3(NAV, 0.5, -1)


@pytest.fixture(scope="session")
def cor51_fams():
    nd = cor51_navigation(0.5, (0.3, 0.0, 0.0))
    return [cor51_build(2.0, 2.0, nd), cor51_build(1.0, 1.0, nd)]


def samples_of(fam, count, seed=0):
    return sample_xy(fam, count, np.random.default_rng(seed))
