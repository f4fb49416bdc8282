"""Decomposition losses.

L1-style terms are reduced with ``weights.reduction`` (mean by default); the
noise term is always the raw Frobenius norm. Weight maps are computed with
recording suspended, so they enter the losses as constants.
"""

import numpy as np

from ..exceptions import ShapeError
from ..models.results import LossBreakdown
from ..tensorcore import (
    Tensor,
    abs_,
    channel_max,
    channel_mean,
    gaussian_filter,
    no_grad,
    reduce,
    spatial_gradient,
    sqrt,
    take_channel,
)


REFL_WEIGHT_EPS = 1e-4
MAXA_EPS = 1e-4
_NORMALIZE_EPS = 1e-12


def _l1(x, weights):
    return reduce(weights.reduction, abs_(x))


def _reduce(x, weights):
    return reduce(weights.reduction, x)


def _same_spatial(*tensors):
    spatial = {t.shape[1:] for t in tensors}
    if len(spatial) != 1:
        raise ShapeError(f"Spatial dimensions differ: {sorted(spatial)}")


def _channels(t, n, name):
    if t.ndim != 3 or t.shape[0] != n:
        raise ShapeError(f"{name} must be {n}xHxW, got shape {t.shape}")


def _gradient_magnitude_l1(t):
    gh, gv = spatial_gradient(t)
    return abs_(gh) + abs_(gv)


# ===========================================
# RECONSTRUCTION
# ===========================================

def recon_loss(R, I, N, S0, weights):
    _channels(R, 3, 'R')
    _channels(I, 1, 'I')
    _channels(N, 3, 'N')
    _channels(S0, 3, 'S0')
    _same_spatial(R, I, N, S0)
    return _l1(R * I + N - S0, weights)


# ===========================================
# SMOOTHNESS
# ===========================================

def illum_weight(x1, weights):
    """1 / (G * |grad gray(x1)|^2 + eps_w), detached"""
    with no_grad():
        gray = channel_mean(Tensor(x1.data[:3]))
        gh, gv = spatial_gradient(gray)
        energy = gh * gh + gv * gv
        blurred = gaussian_filter(energy, weights.gauss_sigma, weights.gauss_ksize)
        return Tensor(1.0 / (blurred.data + weights.eps_w))


def illum_smooth_loss(I, x1, S_m, weights, w=None):
    _channels(I, 1, 'I')
    _channels(S_m, 1, 'S_m')
    _same_spatial(I, x1, S_m)
    if w is None:
        w = illum_weight(x1, weights)
    return _reduce(w * _gradient_magnitude_l1(I), weights) + _l1(I - S_m, weights)


def refl_weight(I, S0, weights):
    """min-max normalized 1 / (I * |grad gray(S0)| + eps), detached"""
    with no_grad():
        edges = _gradient_magnitude_l1(channel_mean(S0)).data
        raw = 1.0 / (I.data * edges + REFL_WEIGHT_EPS)
        lo, hi = raw.min(), raw.max()
        return Tensor((raw - lo) / (hi - lo + _NORMALIZE_EPS))


def refl_smooth_loss(R, I, x1, S0, weights, w_r=None):
    _channels(R, 3, 'R')
    _channels(I, 1, 'I')
    _channels(S0, 3, 'S0')
    _same_spatial(R, I, x1, S0)
    if w_r is None:
        w_r = refl_weight(I, S0, weights)
    smooth = _reduce(w_r * _gradient_magnitude_l1(R), weights)
    fidelity = _l1(S0 / I - R, weights)
    return smooth + weights.lambda_rs * fidelity


# ===========================================
# TEXTURE
# ===========================================

_COLOR_PAIRS = ((0, 1), (0, 2), (1, 2))


def color_loss(R, weights):
    """Charbonnier distance between every pair of global channel means"""
    _channels(R, 3, 'R')
    means = [reduce('mean', take_channel(R, c)) for c in range(3)]
    eps2 = weights.eps_color * weights.eps_color
    total = None
    for i, j in _COLOR_PAIRS:
        d = means[i] - means[j]
        term = sqrt(d * d + eps2)
        total = term if total is None else total + term
    return total


def region_loss(R, S0, mask, weights):
    """w_low * |R - S0| over the dark region + w_high * the same over the rest.

    Each region is averaged over its own elements under ``mean`` and summed
    under ``sum``.
    """
    _channels(R, 3, 'R')
    _channels(S0, 3, 'S0')
    _same_spatial(R, S0)
    if mask.mask.shape != R.shape[1:]:
        raise ShapeError(f"Mask shape {mask.mask.shape} does not match image {R.shape[1:]}")
    diff = abs_(R - S0)
    dark = mask.mask[None].astype(np.float64)
    n_dark = int(mask.mask.sum())
    n_bright = mask.mask.size - n_dark
    averaged = weights.reduction == 'mean'
    total = Tensor(0.0)
    if n_dark:
        scale = 1.0 / (3 * n_dark) if averaged else 1.0
        total = total + weights.w_low * reduce('sum', diff * dark) * scale
    if n_bright:
        scale = 1.0 / (3 * n_bright) if averaged else 1.0
        total = total + weights.w_high * reduce('sum', diff * (1.0 - dark)) * scale
    return total


def maxa_loss(R, S0, weights=None):
    """Per-pixel |max_c S0 - max_c R| / (max_c S0 + 1e-4), reduced over pixels"""
    _channels(R, 3, 'R')
    _channels(S0, 3, 'S0')
    _same_spatial(R, S0)
    s_max = np.max(S0.data, axis=0, keepdims=True)
    ratio = abs_(Tensor(s_max) - channel_max(R)) * Tensor(1.0 / (s_max + MAXA_EPS))
    reduction = weights.reduction if weights is not None else 'mean'
    return reduce(reduction, ratio)


# ===========================================
# NOISE
# ===========================================

def noise_loss(I, N):
    """Frobenius norm of the illumination-weighted noise map"""
    _channels(I, 1, 'I')
    _channels(N, 3, 'N')
    _same_spatial(I, N)
    weighted = I * N
    return sqrt(reduce('sum', weighted * weighted))


# ===========================================
# TOTAL
# ===========================================

def total_loss(R, I, N, x1, S0, S_m, mask, weights, w_illum=None, w_refl=None):
    """Evaluate every term and the weighted total.

    The returned breakdown holds plain floats plus ``total_tensor`` for
    backward. ``w_illum``/``w_refl`` may be passed in when precomputed.
    """
    recon = recon_loss(R, I, N, S0, weights)
    illum = illum_smooth_loss(I, x1, S_m, weights, w=w_illum)
    refl = refl_smooth_loss(R, I, x1, S0, weights, w_r=w_refl)
    color = color_loss(R, weights)
    region = region_loss(R, S0, mask, weights)
    maxa = maxa_loss(R, S0, weights)
    noise = noise_loss(I, N)

    total = (
        recon
        + weights.lambda_i * illum
        + weights.lambda_k * refl
        + weights.lambda_color * color
        + weights.lambda_region * region
        + weights.lambda_maxa * maxa
        + weights.lambda_n * noise
    )
    return LossBreakdown(
        recon=recon.item(),
        illum_smooth=illum.item(),
        refl_smooth=refl.item(),
        color=color.item(),
        region=region.item(),
        maxa=maxa.item(),
        noise=noise.item(),
        total=total.item(),
        total_tensor=total,
    )

