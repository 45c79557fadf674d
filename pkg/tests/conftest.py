import warnings

import pytest
from hypothesis import HealthCheck, settings

from boundpair.model import ModelParams

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def rates(params):
    return params.rates()


def quiet(**kw):
    """ModelParams without regime warnings (for deliberately odd parameters)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ModelParams(**kw)
