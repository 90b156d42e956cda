import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("lab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def gauss_measure():
    from mlsilab import build_measure, gaussian
    return build_measure(gaussian())


@pytest.fixture(scope="session")
def quartic_measure():
    from mlsilab import build_measure, quartic
    return build_measure(quartic())


@pytest.fixture(scope="session")
def power4_measure():
    from mlsilab import build_measure, power
    return build_measure(power(4))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
