import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)


def random_mask(rng, max_side=16, p=0.4, allow_empty=True):
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    m = (rng.random((h, w)) < p).astype(np.uint8)
    if not allow_empty and m.sum() == 0:
        m[rng.integers(0, h), rng.integers(0, w)] = 1
    return m


def random_mask_pair(rng, max_side=16, p=0.4):
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    a = (rng.random((h, w)) < p).astype(np.uint8)
    b = (rng.random((h, w)) < p).astype(np.uint8)
    return a, b
