from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigError, MissingGradientError


@dataclass
class AdamState:
    lr: float
    beta1: float
    beta2: float
    eps: float
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_init(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Zero moments for every tensor of ``params`` (a NetParams or name->Tensor dict)"""
    if lr <= 0:
        raise ConfigError(f"Adam lr must be > 0, got {lr}")
    for name, beta in (('beta1', beta1), ('beta2', beta2)):
        if not 0.0 <= beta < 1.0:
            raise ConfigError(f"Adam {name} must lie in [0, 1), got {beta}")
    if eps <= 0:
        raise ConfigError(f"Adam eps must be > 0, got {eps}")
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for name, tensor in _named(params):
        state.m[name] = np.zeros_like(tensor.data)
        state.v[name] = np.zeros_like(tensor.data)
    return state


def _named(params):
    if isinstance(params, dict):
        return list(params.items())
    return list(params.named_tensors())


def adam_step(params, state):
    """Update every tensor in place from its ``.grad``; all networks move together"""
    named = _named(params)
    for name, tensor in named:
        if tensor.grad is None:
            raise MissingGradientError(f"No gradient for parameter {name}")

    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t

    for name, tensor in named:
        g = tensor.grad
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        tensor.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state
