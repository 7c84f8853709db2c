import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kplab import kernels
from kplab.control import make_bump

settings.register_profile("kplab", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("kplab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def centred_bump8():
    return make_bump(-np.pi / 2, np.pi / 2, 8)


@pytest.fixture(params=["numba", "numpy"])
def each_backend(request):
    if request.param == "numba" and not kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    old = kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(old)
