from .tensor import Tensor, Tape, backward, current_tape, no_grad
from .ops import (
    EPS_DIV,
    abs_,
    channel_max,
    channel_mean,
    clamp,
    concat,
    conv2d,
    elementwise_map,
    elementwise_zip,
    gaussian_filter,
    gaussian_kernel,
    instance_norm,
    log,
    pow_,
    reduce,
    relu,
    repeat_channels,
    sigmoid,
    spatial_gradient,
    sqrt,
    take_channel,
    tanh,
)
