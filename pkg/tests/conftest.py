import numpy as np
import pytest

from sgnmf.library import load_builtin_library


@pytest.fixture(scope="session")
def library():
    return load_builtin_library()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
