import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from goldprod.config import builtin_catalog

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def catalog():
    return builtin_catalog()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
