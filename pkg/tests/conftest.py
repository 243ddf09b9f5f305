import numpy as np
import pytest

from rydcz.pulses import TWO_PI, SweepParams

V_DEFAULT = TWO_PI * 500e6
T_SAFFMAN = 0.54e-6


@pytest.fixture(scope="session")
def sweep_s1():
    return SweepParams.from_scale(1.0, T_SAFFMAN)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
