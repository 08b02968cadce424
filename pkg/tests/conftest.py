import numpy as np
import pytest

from multistable import AlphaFunction


@pytest.fixture
def affine_alpha():
    return AlphaFunction.affine(1.2, 0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
