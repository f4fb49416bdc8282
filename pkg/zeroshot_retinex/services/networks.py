"""Reflectance, illumination and noise networks.

The networks are plain parameter containers plus forward functions; the
parameters are optimized from scratch for every image and then discarded.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ShapeError
from ..models.enhance_config import NetConfig
from ..tensorcore import Tensor, conv2d, instance_norm, relu, sigmoid, tanh

_logger = logging.getLogger(__name__)

FUSED_CHANNELS = 4
IMAGE_CHANNELS = 3


@dataclass
class ConvParams:
    weight: Tensor
    bias: Tensor


@dataclass
class NormParams:
    scale: Tensor
    shift: Tensor


@dataclass
class NetParams:
    """Learnable tensors of all three networks"""

    config: NetConfig
    r_layers: list = field(default_factory=list)
    i_layers: list = field(default_factory=list)
    n_layers: list = field(default_factory=list)
    n_norms: list = field(default_factory=list)

    def named_tensors(self):
        """Yield (name, tensor) pairs in a fixed order"""
        for prefix, layers in (('r', self.r_layers), ('i', self.i_layers), ('n', self.n_layers)):
            for idx, layer in enumerate(layers):
                yield f"{prefix}.{idx}.weight", layer.weight
                yield f"{prefix}.{idx}.bias", layer.bias
        for idx, norm in enumerate(self.n_norms):
            yield f"n.norm{idx}.scale", norm.scale
            yield f"n.norm{idx}.shift", norm.shift

    def tensors(self):
        return [t for _, t in self.named_tensors()]

    def count(self):
        return sum(t.size for t in self.tensors())


def _he_conv(rng, out_ch, in_ch, k):
    fan_in = in_ch * k * k
    weight = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(out_ch, in_ch, k, k))
    return ConvParams(
        weight=Tensor(weight, requires_grad=True),
        bias=Tensor(np.zeros(out_ch), requires_grad=True),
    )


def _stack(rng, in_ch, depth, width, k, out_ch):
    layers = [_he_conv(rng, width, in_ch, k)]
    layers += [_he_conv(rng, width, width, k) for _ in range(depth - 1)]
    layers.append(_he_conv(rng, out_ch, width, 1))
    return layers


def init_params(cfg):
    """He-normal weights, zero biases, unit norm scales, from ``cfg.seed``"""
    rng = np.random.default_rng(cfg.seed)
    params = NetParams(config=cfg)
    params.r_layers = _stack(rng, FUSED_CHANNELS, cfg.r_depth, cfg.width, cfg.kernel, IMAGE_CHANNELS)
    params.i_layers = _stack(rng, FUSED_CHANNELS, cfg.i_depth, cfg.width, cfg.kernel, 1)
    params.n_layers = _stack(rng, IMAGE_CHANNELS, cfg.n_depth, cfg.width, cfg.kernel, IMAGE_CHANNELS)
    params.n_norms = [
        NormParams(
            scale=Tensor(np.ones((cfg.width, 1, 1)), requires_grad=True),
            shift=Tensor(np.zeros((cfg.width, 1, 1)), requires_grad=True),
        )
        for _ in range(cfg.n_depth)
    ]
    _logger.debug(f"Initialized {params.count()} parameters with seed {cfg.seed}")
    return params


def _conv(x, layer):
    return conv2d(x, layer.weight, layer.bias)


def _branch(x, layers, head):
    for layer in layers[:-1]:
        x = relu(_conv(x, layer))
    return head(_conv(x, layers[-1]))


def forward_ri(x1, params):
    """Return (R 3xHxW, I 1xHxW), both in (0, 1), from the fused input"""
    if x1.ndim != 3 or x1.shape[0] != FUSED_CHANNELS:
        raise ShapeError(f"forward_ri expects a 4xHxW input, got shape {x1.shape}")
    reflectance = _branch(x1, params.r_layers, sigmoid)
    illumination = _branch(x1, params.i_layers, sigmoid)
    return reflectance, illumination


def forward_n(x0, params):
    """Return the signed noise map N in (-1, 1) estimated from the raw image"""
    if x0.ndim != 3 or x0.shape[0] != IMAGE_CHANNELS:
        raise ShapeError(f"forward_n expects a 3xHxW input, got shape {x0.shape}")
    x = x0
    for layer, norm in zip(params.n_layers[:-1], params.n_norms):
        x = instance_norm(_conv(x, layer)) * norm.scale + norm.shift
        x = relu(x)
    return tanh(_conv(x, params.n_layers[-1]))
