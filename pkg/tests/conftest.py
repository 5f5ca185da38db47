# tests/conftest.py
import numpy as np
import pytest

from core.dncm import init_params
from core.encoder import init_encoder
from core.linalg import ImageStack


def philox(seed: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def random_stack(h: int, w: int, n: int, seed: int = 0) -> ImageStack:
    return ImageStack(philox(seed).random((h, w, 3 * n)))


@pytest.fixture
def rng():
    return philox(1234)


@pytest.fixture
def small_model():
    """k=4, N=2, encodeur à deux étages étroits."""
    params = init_params(k=4, n_settings=2, seed=3)
    enc = init_encoder(n_settings=2, k=4, seed=4, widths=(4, 6))
    return params, enc
