"""Differentiable operations on CxHxW tensors.

Each operation is a ``Function`` subclass with a numpy ``forward`` and a
``backward`` returning one gradient per input (None for constants). The
functional wrappers at the bottom are the public API.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ShapeError
from .tensor import Tensor, as_tensor, current_tape

EPS_DIV = 1e-4
EPS_ROOT = 1e-12
EPS_NORM = 1e-5


class Function:
    def __init__(self, **kwargs):
        self.parents = ()
        self.__dict__.update(kwargs)

    @classmethod
    def apply(cls, *inputs, **kwargs):
        tensors = tuple(as_tensor(x) for x in inputs)
        fn = cls(**kwargs)
        fn.parents = tensors
        out = Tensor.wrap(fn.forward(*[t.data for t in tensors]))
        tape = current_tape()
        if tape is not None and any(t.requires_grad for t in tensors):
            out.requires_grad = True
            tape.record(fn, out)
        return out

    def forward(self, *arrays):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a, b, name):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: incompatible shapes {a.shape} and {b.shape}") from None


# ===========================================
# ELEMENTWISE BINARY
# ===========================================

class Add(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return (_unbroadcast(grad * self.b, self.a.shape),
                _unbroadcast(grad * self.a, self.b.shape))


class Div(Function):
    """a / max(b, EPS_DIV); the clamp is part of the function in both passes"""

    def forward(self, a, b):
        self.a = a
        self.b_shape = b.shape
        self.live = b >= EPS_DIV
        self.denom = np.maximum(b, EPS_DIV)
        return a / self.denom

    def backward(self, grad):
        ga = grad / self.denom
        gb = np.where(self.live, -grad * self.a / (self.denom * self.denom), 0.0)
        return _unbroadcast(ga, self.a.shape), _unbroadcast(gb, self.b_shape)


# ===========================================
# ELEMENTWISE UNARY
# ===========================================

class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, grad):
        return (-grad,)


class Abs(Function):
    def forward(self, a):
        self.sign = np.sign(a)
        return np.abs(a)

    def backward(self, grad):
        return (grad * self.sign,)


class Sqrt(Function):
    def forward(self, a):
        self.a = a
        return np.sqrt(np.maximum(a, 0.0))

    def backward(self, grad):
        return (grad * 0.5 / np.sqrt(np.maximum(self.a, 0.0) + EPS_ROOT),)


class Pow(Function):
    def forward(self, a):
        p = self.p
        self.integral = float(p).is_integer()
        self.base = a if self.integral else np.maximum(a, 0.0)
        return np.power(self.base, p)

    def backward(self, grad):
        p = self.p
        if p == 0:
            return (np.zeros_like(grad),)
        with np.errstate(divide='ignore', invalid='ignore'):
            d = p * np.power(self.base, p - 1)
        d = np.where(np.isfinite(d), d, 0.0)
        if not self.integral:
            d = np.where(self.base > 0, d, 0.0)
        return (grad * d,)


class Sigmoid(Function):
    def forward(self, a):
        self.out = 0.5 * (1.0 + np.tanh(0.5 * a))
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Relu(Function):
    def forward(self, a):
        self.mask = a > 0
        return np.where(self.mask, a, 0.0)

    def backward(self, grad):
        return (grad * self.mask,)


class Tanh(Function):
    def forward(self, a):
        self.out = np.tanh(a)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out * self.out),)


class Clamp(Function):
    def forward(self, a):
        self.mask = (a >= self.lo) & (a <= self.hi)
        return np.clip(a, self.lo, self.hi)

    def backward(self, grad):
        return (grad * self.mask,)


class Log(Function):
    def forward(self, a):
        self.shifted = np.maximum(a, 0.0) + EPS_ROOT
        return np.log(self.shifted)

    def backward(self, grad):
        return (grad / self.shifted,)


# ===========================================
# REDUCTIONS AND CHANNEL PLUMBING
# ===========================================

class Sum(Function):
    def forward(self, a):
        self.shape = a.shape
        return np.asarray(a.sum())

    def backward(self, grad):
        return (np.broadcast_to(grad, self.shape).copy(),)


class Mean(Function):
    def forward(self, a):
        self.shape = a.shape
        return np.asarray(a.sum() / a.size)

    def backward(self, grad):
        return (np.broadcast_to(grad / math.prod(self.shape), self.shape).copy(),)


class ChannelMax(Function):
    def forward(self, a):
        self.shape = a.shape
        self.idx = np.argmax(a, axis=0)[None]
        return np.take_along_axis(a, self.idx, axis=0)

    def backward(self, grad):
        out = np.zeros(self.shape)
        np.put_along_axis(out, self.idx, grad, axis=0)
        return (out,)


class TakeChannel(Function):
    def forward(self, a):
        self.shape = a.shape
        return a[self.channel:self.channel + 1].copy()

    def backward(self, grad):
        out = np.zeros(self.shape)
        out[self.channel:self.channel + 1] = grad
        return (out,)


class RepeatChannels(Function):
    def forward(self, a):
        return np.repeat(a, self.n, axis=0)

    def backward(self, grad):
        return (grad.sum(axis=0, keepdims=True),)


class Concat(Function):
    def forward(self, *arrays):
        self.splits = np.cumsum([a.shape[0] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=0)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=0))


class GradH(Function):
    """Forward difference along width, zero in the last column"""

    def forward(self, a):
        out = np.zeros_like(a)
        out[:, :, :-1] = a[:, :, 1:] - a[:, :, :-1]
        return out

    def backward(self, grad):
        g = grad[:, :, :-1]
        out = np.zeros_like(grad)
        out[:, :, 1:] += g
        out[:, :, :-1] -= g
        return (out,)


class GradV(Function):
    """Forward difference along height, zero in the last row"""

    def forward(self, a):
        out = np.zeros_like(a)
        out[:, :-1, :] = a[:, 1:, :] - a[:, :-1, :]
        return out

    def backward(self, grad):
        g = grad[:, :-1, :]
        out = np.zeros_like(grad)
        out[:, 1:, :] += g
        out[:, :-1, :] -= g
        return (out,)


# ===========================================
# CONVOLUTION AND NORMALIZATION
# ===========================================

class Conv2d(Function):
    """Zero-padded cross-correlation computed as one matmul over im2col columns"""

    def forward(self, x, w, b):
        c, h, wd = x.shape
        o, _, k, _ = w.shape
        p = self.padding
        xp = np.pad(x, ((0, 0), (p, p), (p, p)))
        cols = sliding_window_view(xp, (k, k), axis=(1, 2))
        self.cols = cols.transpose(0, 3, 4, 1, 2).reshape(c * k * k, h * wd)
        self.x_shape = x.shape
        self.w = w
        out = w.reshape(o, -1) @ self.cols + b[:, None]
        return out.reshape(o, h, wd)

    def backward(self, grad):
        c, h, wd = self.x_shape
        o, _, k, _ = self.w.shape
        p = self.padding
        g = grad.reshape(o, h * wd)
        dw = (g @ self.cols.T).reshape(self.w.shape)
        db = g.sum(axis=1)
        dcols = (self.w.reshape(o, -1).T @ g).reshape(c, k, k, h, wd)
        dxp = np.zeros((c, h + 2 * p, wd + 2 * p))
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + h, j:j + wd] += dcols[:, i, j]
        return dxp[:, p:p + h, p:p + wd], dw, db


class InstanceNorm(Function):
    """Per-channel standardization over spatial positions"""

    def forward(self, x):
        mu = x.mean(axis=(1, 2), keepdims=True)
        var = ((x - mu) ** 2).mean(axis=(1, 2), keepdims=True)
        self.inv = 1.0 / np.sqrt(var + self.eps)
        self.xhat = (x - mu) * self.inv
        return self.xhat

    def backward(self, grad):
        n = grad.shape[1] * grad.shape[2]
        gsum = grad.sum(axis=(1, 2), keepdims=True)
        gx = (grad * self.xhat).sum(axis=(1, 2), keepdims=True)
        return (self.inv / n * (n * grad - gsum - self.xhat * gx),)


# ===========================================
# FUNCTIONAL API
# ===========================================

def add(a, b):
    return Add.apply(a, b)


def sub(a, b):
    return Sub.apply(a, b)


def mul(a, b):
    return Mul.apply(a, b)


def div(a, b):
    return Div.apply(a, b)


def neg(a):
    return Neg.apply(a)


def abs_(a):
    return Abs.apply(a)


def sqrt(a):
    return Sqrt.apply(a)


def pow_(a, p):
    return Pow.apply(a, p=float(p))


def sigmoid(a):
    return Sigmoid.apply(a)


def relu(a):
    return Relu.apply(a)


def tanh(a):
    return Tanh.apply(a)


def clamp(a, lo, hi):
    return Clamp.apply(a, lo=float(lo), hi=float(hi))


def log(a):
    return Log.apply(a)


_ZIP_OPS = {'add': Add, 'sub': Sub, 'mul': Mul, 'div': Div}


def elementwise_zip(op, a, b):
    a, b = as_tensor(a), as_tensor(b)
    if op not in _ZIP_OPS:
        raise ValueError(f"Unknown elementwise op: {op}")
    _check_broadcast(a, b, op)
    return _ZIP_OPS[op].apply(a, b)


def elementwise_map(op, a, **kwargs):
    """Apply a named unary op: abs, sqrt, pow(p=), sigmoid, relu, tanh, clamp(lo=, hi=), log"""
    if op == 'pow':
        return pow_(a, kwargs['p'])
    if op == 'clamp':
        return clamp(a, kwargs['lo'], kwargs['hi'])
    table = {'abs': Abs, 'sqrt': Sqrt, 'sigmoid': Sigmoid, 'relu': Relu, 'tanh': Tanh, 'log': Log}
    if op not in table:
        raise ValueError(f"Unknown elementwise op: {op}")
    return table[op].apply(a)


def reduce(op, a):
    a = as_tensor(a)
    if a.size == 0:
        raise ShapeError("Cannot reduce an empty tensor")
    if op == 'sum':
        return Sum.apply(a)
    if op == 'mean':
        return Mean.apply(a)
    raise ValueError(f"Unknown reduction: {op}")


def _check_chw(a, name):
    if a.ndim != 3:
        raise ShapeError(f"{name} expects a CxHxW tensor, got shape {a.shape}")


def spatial_gradient(a):
    """Return (gh, gv) forward differences with trailing zeros"""
    a = as_tensor(a)
    _check_chw(a, 'spatial_gradient')
    if a.shape[1] < 2 or a.shape[2] < 2:
        raise ShapeError(f"spatial_gradient needs H, W >= 2, got {a.shape[1:]}")
    return GradH.apply(a), GradV.apply(a)


def channel_max(a):
    a = as_tensor(a)
    _check_chw(a, 'channel_max')
    if a.shape[0] != 3:
        raise ShapeError(f"channel_max expects 3 channels, got {a.shape[0]}")
    return ChannelMax.apply(a)


def channel_mean(a):
    """Grayscale as the plain mean of the channels"""
    a = as_tensor(a)
    _check_chw(a, 'channel_mean')
    out = take_channel(a, 0)
    for c in range(1, a.shape[0]):
        out = out + take_channel(a, c)
    return out * (1.0 / a.shape[0])


def take_channel(a, channel):
    a = as_tensor(a)
    if not 0 <= channel < a.shape[0]:
        raise ShapeError(f"Channel {channel} out of range for shape {a.shape}")
    return TakeChannel.apply(a, channel=channel)


def repeat_channels(a, n):
    a = as_tensor(a)
    if a.shape[0] != 1:
        raise ShapeError(f"repeat_channels expects 1 channel, got {a.shape[0]}")
    return RepeatChannels.apply(a, n=n)


def concat(tensors):
    tensors = [as_tensor(t) for t in tensors]
    spatial = {t.shape[1:] for t in tensors}
    if len(spatial) != 1:
        raise ShapeError(f"concat needs matching spatial dims, got {sorted(spatial)}")
    return Concat.apply(*tensors)


def conv2d(x, weight, bias, padding=None):
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    _check_chw(x, 'conv2d')
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(f"conv2d weight must be OxCxKxK, got {weight.shape}")
    o, c, k, _ = weight.shape
    if k % 2 == 0:
        raise ShapeError(f"conv2d kernel size must be odd, got {k}")
    if c != x.shape[0]:
        raise ShapeError(f"conv2d weight expects {c} input channels, input has {x.shape[0]}")
    if bias.shape != (o,):
        raise ShapeError(f"conv2d bias must have shape ({o},), got {bias.shape}")
    same = (k - 1) // 2
    if padding is None:
        padding = same
    if padding != same:
        raise ShapeError(f"conv2d padding must be {same} for kernel {k}, got {padding}")
    return Conv2d.apply(x, weight, bias, padding=padding)


def instance_norm(x, eps=EPS_NORM):
    x = as_tensor(x)
    _check_chw(x, 'instance_norm')
    return InstanceNorm.apply(x, eps=eps)


def gaussian_kernel(sigma, ksize):
    if ksize % 2 == 0 or ksize < 1:
        raise ShapeError(f"Gaussian kernel size must be odd and positive, got {ksize}")
    if sigma <= 0:
        raise ValueError(f"Gaussian sigma must be positive, got {sigma}")
    r = ksize // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-x * x / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def gaussian_filter(a, sigma=1.0, ksize=5):
    """Blur each channel with a normalized Gaussian, reflect padding.

    Padding wider than the image keeps reflecting, so any H, W >= 2 works.
    The result is a constant: no gradient flows through it.
    """
    a = as_tensor(a)
    _check_chw(a, 'gaussian_filter')
    kernel = gaussian_kernel(sigma, ksize)
    r = ksize // 2
    if a.shape[1] < 2 or a.shape[2] < 2:
        raise ShapeError(f"gaussian_filter needs H, W >= 2, got {a.shape[1:]}")
    padded = np.pad(a.data, ((0, 0), (r, r), (r, r)), mode='reflect')
    windows = sliding_window_view(padded, (ksize, ksize), axis=(1, 2))
    return Tensor(np.einsum('chwij,ij->chw', windows, kernel))
