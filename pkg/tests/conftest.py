import numpy as np
import pytest

from zeroshot_retinex.models import EnhanceConfig, NetConfig
from zeroshot_retinex.tensorcore import Tensor


def _make_pattern(h=64, w=64):
    """Deterministic natural-looking RGB test image in [0.05, 0.95]"""
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    y /= max(h - 1, 1)
    x /= max(w - 1, 1)
    r = 0.5 + 0.35 * np.sin(2 * np.pi * (x + 0.3 * y))
    g = 0.3 + 0.6 * x * (1 - y) + 0.05 * np.cos(6 * np.pi * y)
    b = 0.2 + 0.5 * y + 0.15 * ((np.floor(x * 4) + np.floor(y * 4)) % 2)
    img = np.stack([r, g, b])
    # A bright square and a dark stripe give edges of both polarities.
    img[:, h // 4:h // 2, w // 4:w // 2] = [[[0.9]], [[0.85]], [[0.8]]]
    img[:, 3 * h // 4:, :] *= 0.4
    return Tensor(np.clip(img, 0.05, 0.95))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def make_pattern():
    return _make_pattern


@pytest.fixture
def tiny_net():
    return NetConfig(r_depth=3, i_depth=2, n_depth=2, width=4, seed=7)


@pytest.fixture
def tiny_config(tiny_net):
    return EnhanceConfig(iterations=3, net=tiny_net)


@pytest.fixture
def random_image(rng):
    def _factory(h=8, w=8, lo=0.01, hi=1.0):
        return Tensor(rng.uniform(lo, hi, size=(3, h, w)))
    return _factory
