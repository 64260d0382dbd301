import numpy as np
import pytest


def random_symmetric(rng, d, indefinite=True):
    A = rng.standard_normal((d, d))
    A = (A + A.T) / 2
    if not indefinite:
        A = A @ A.T + np.eye(d)
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
