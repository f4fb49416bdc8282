import math

import numpy as np

from ..exceptions import ConfigError, ShapeError
from ..models.results import DarkRegionMask
from ..tensorcore import Tensor, channel_max, concat


def _check_rgb(img, name):
    if img.ndim != 3 or img.shape[0] != 3:
        raise ShapeError(f"{name} expects a 3xHxW image, got shape {img.shape}")


def value_channel(img):
    """HSV value: per-pixel maximum over R, G, B"""
    _check_rgb(img, 'value_channel')
    return channel_max(img)


def max_channel_map(img):
    """Maximum channel of the low-light image; identical to its value channel"""
    return value_channel(img)


def fuse_input(img, v):
    """Stack the image and its value channel into the 4-channel network input"""
    _check_rgb(img, 'fuse_input')
    if v.ndim != 3 or v.shape[0] != 1:
        raise ShapeError(f"fuse_input expects a 1xHxW value channel, got shape {v.shape}")
    if v.shape[1:] != img.shape[1:]:
        raise ShapeError(f"fuse_input spatial mismatch: {img.shape[1:]} vs {v.shape[1:]}")
    return concat([img, v])


def luminance(img):
    """Channel mean per pixel, summed in sorted order so channel order never matters"""
    _check_rgb(img, 'luminance')
    data = img.data if isinstance(img, Tensor) else np.asarray(img, dtype=np.float64)
    return np.sort(data, axis=0).sum(axis=0) / 3.0


def mean_luminance(img):
    return float(luminance(img).mean())


def dark_region_mask(img, fraction=0.4):
    """Select pixels at or below the nearest-rank ``fraction`` quantile of luminance"""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"dark fraction must lie in (0, 1), got {fraction}")
    lum = luminance(img)
    flat = np.sort(lum, axis=None)
    # round() absorbs representation error such as 0.3 * 10 = 3.0000000000000004
    rank = max(1, math.ceil(round(fraction * flat.size, 9)))
    threshold = float(flat[rank - 1])
    return DarkRegionMask(mask=lum <= threshold, fraction=fraction, threshold=threshold)


def synthesize_low_light(clean, power=3.0, noise_sigma=0.02, seed=0):
    """Darken a clean image by s -> s**power and add zero-mean Gaussian noise"""
    _check_rgb(clean, 'synthesize_low_light')
    data = clean.data if isinstance(clean, Tensor) else np.asarray(clean, dtype=np.float64)
    rng = np.random.default_rng(seed)
    dark = np.power(np.clip(data, 0.0, 1.0), power)
    if noise_sigma > 0:
        dark = dark + rng.normal(0.0, noise_sigma, size=dark.shape)
    return Tensor(np.clip(dark, 0.0, 1.0))


def psnr(a, b):
    """Peak signal-to-noise ratio in dB for images in [0, 1]"""
    da = a.data if isinstance(a, Tensor) else np.asarray(a)
    db = b.data if isinstance(b, Tensor) else np.asarray(b)
    mse = float(np.mean((da - db) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)
