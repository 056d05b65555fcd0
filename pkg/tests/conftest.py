import math

import pytest

from polaron_bounds.model import PolaronModel, RadialProfile, compute_constants

PI32 = math.pi ** 1.5


def gaussian_d3(alpha=100.0, m=1.0):
    return PolaronModel(3, m, alpha, RadialProfile.gaussian(), RadialProfile.constant(1.0))


def superfluid_d3(alpha=1e4, m=1.0):
    return PolaronModel(3, m, alpha, RadialProfile.gaussian(), RadialProfile.power(1.0, 1.0, 1.0, 1.0))


def gaussian_d1(alpha=0.1, m=1.0):
    return PolaronModel(1, m, alpha, RadialProfile.gaussian(), RadialProfile.constant(1.0))


@pytest.fixture(scope="session")
def gauss3():
    model = gaussian_d3()
    return model, compute_constants(model)


@pytest.fixture(scope="session")
def fluid3():
    model = superfluid_d3()
    return model, compute_constants(model)


@pytest.fixture(scope="session")
def gauss1():
    model = gaussian_d1()
    return model, compute_constants(model)
