import numpy as np
import pytest

from dln.linalg import make_rng


@pytest.fixture
def rng():
    return make_rng(1234)


def random_matrix(rng, rows, cols, scale=1.0):
    return scale * rng.standard_normal((rows, cols))
