import numpy as np
import pytest
from hypothesis import settings

from dacfdi.consensus import Kind, default_design

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def isac_design():
    return default_design(Kind.ISAC, 1.5)


@pytest.fixture(scope="session")
def rac_design():
    return default_design(Kind.RAC, 1.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
