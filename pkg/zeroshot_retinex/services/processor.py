import logging
import time

import numpy as np

from ..exceptions import ConfigError, DivergenceError, ShapeError
from ..models.enhance_config import EnhanceConfig
from ..models.results import DecompositionResult, EnhanceResult
from ..tensorcore import Tape, Tensor, backward, clamp, no_grad, pow_, repeat_channels
from .imaging import dark_region_mask, fuse_input, max_channel_map, value_channel
from .losses import illum_weight, refl_weight, total_loss
from .networks import forward_n, forward_ri, init_params
from .optimizer import adam_init, adam_step

_logger = logging.getLogger(__name__)


# ===========================================
# DECOMPOSITION
# ===========================================

def decompose(S0, cfg=None):
    """Optimize fresh networks on ``S0`` and return its R, I, N and loss trace"""
    cfg = cfg if cfg is not None else EnhanceConfig()
    if S0.ndim != 3 or S0.shape[0] != 3:
        raise ShapeError(f"decompose expects a 3xHxW image, got shape {S0.shape}")
    S0 = Tensor(S0.data)

    x1 = fuse_input(S0, value_channel(S0))
    S_m = max_channel_map(S0)
    weights = cfg.weights
    mask = dark_region_mask(S0, weights.dark_fraction)
    w_illum = illum_weight(x1, weights)

    params = init_params(cfg.net)
    state = adam_init(params, lr=cfg.adam.lr, beta1=cfg.adam.beta1,
                      beta2=cfg.adam.beta2, eps=cfg.adam.eps)

    trace = []
    started = time.monotonic()
    for iteration in range(cfg.iterations):
        with Tape():
            R, I = forward_ri(x1, params)
            N = forward_n(S0, params)
            # Depends on the current illumination, so it is rebuilt every step.
            w_refl = refl_weight(I, S0, weights)
            losses = total_loss(R, I, N, x1, S0, S_m, mask, weights,
                                w_illum=w_illum, w_refl=w_refl)

        if not losses.is_finite():
            raise DivergenceError(iteration, f"Non-finite loss at iteration {iteration}: {losses.as_dict()}")

        backward(losses.total_tensor)
        losses.total_tensor = None
        trace.append(losses)
        adam_step(params, state)

        if (iteration + 1) % cfg.log_every == 0:
            _logger.debug(
                f"iter {iteration + 1}/{cfg.iterations} total={losses.total:.6f} "
                f"recon={losses.recon:.6f} noise={losses.noise:.6f}"
            )

    # Components from the last update, evaluated without recording.
    with no_grad():
        R, I = forward_ri(x1, params)
        N = forward_n(S0, params)

    _logger.info(
        f"Decomposed {S0.shape[1]}x{S0.shape[2]} image in {cfg.iterations} iterations "
        f"({time.monotonic() - started:.1f}s), final loss {trace[-1].total:.6f}"
    )
    return DecompositionResult(reflectance=R, illumination=I, noise=N, loss_trace=trace)


# ===========================================
# ENHANCEMENT STAGE
# ===========================================

def gamma_adjust(I, gamma):
    """Replicate I to three channels and raise it to ``gamma``"""
    if gamma <= 0:
        raise ConfigError(f"gamma must be > 0, got {gamma}")
    with no_grad():
        return pow_(repeat_channels(I, 3), gamma)


def denoise(S0, N):
    if S0.shape != N.shape:
        raise ShapeError(f"denoise shape mismatch: {S0.shape} vs {N.shape}")
    with no_grad():
        return clamp(S0 - N, 0.0, 1.0)


def recompute_reflectance(S_hat, I):
    """S_hat over I replicated to three channels (denominator floored at EPS_DIV), clamped to [0, 1]"""
    if I.ndim != 3 or I.shape[0] != 1 or I.shape[1:] != S_hat.shape[1:]:
        raise ShapeError(f"recompute_reflectance shape mismatch: {S_hat.shape} vs {I.shape}")
    with no_grad():
        return clamp(S_hat / repeat_channels(I, S_hat.shape[0]), 0.0, 1.0)


def compose(R_hat, I_hat):
    if R_hat.shape != I_hat.shape:
        raise ShapeError(f"compose shape mismatch: {R_hat.shape} vs {I_hat.shape}")
    with no_grad():
        return clamp(R_hat * I_hat, 0.0, 1.0)


def enhance(S0, cfg=None):
    """Full procedure: decompose, then recombine a denoised reflectance with brightened light"""
    cfg = cfg if cfg is not None else EnhanceConfig()
    decomposition = decompose(S0, cfg)
    I = decomposition.illumination
    I_hat = gamma_adjust(I, cfg.gamma)
    S_hat = denoise(S0, decomposition.noise)
    R_hat = recompute_reflectance(S_hat, I)
    enhanced = compose(R_hat, I_hat)
    if not np.all(np.isfinite(enhanced.data)):
        raise DivergenceError(cfg.iterations, "Enhanced image contains non-finite values")
    return EnhanceResult(
        enhanced=enhanced,
        adjusted_illumination=I_hat,
        denoised=S_hat,
        reflectance=R_hat,
        decomposition=decomposition,
    )
