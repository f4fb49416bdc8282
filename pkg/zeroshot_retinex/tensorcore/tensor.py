"""Dense tensors recorded on an explicit reverse-mode tape.

A ``Tape`` is entered as a context manager; every differentiable operation
evaluated while it is active and touching a ``requires_grad`` tensor is
appended to it. ``backward(loss)`` replays the records in reverse creation
order, which is a valid reverse topological order because an operation is
always recorded after its inputs exist.
"""

import threading
from contextlib import contextmanager

import numpy as np

from ..exceptions import ShapeError, TapeError

_state = threading.local()


def _tape_stack():
    stack = getattr(_state, 'stack', None)
    if stack is None:
        stack = _state.stack = []
    return stack


def current_tape():
    """Return the innermost active tape, or None when recording is off"""
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def no_grad():
    """Suspend recording; results computed inside are constants"""
    stack = _tape_stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


class Tensor:
    """Float64 array with an optional gradient.

    Tensors are value-semantic: operations never modify their inputs, only
    the optimizer writes to ``data`` in place between tapes.
    """

    # Make numpy defer to the reflected Tensor operators.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._tape = None

    @classmethod
    def wrap(cls, array):
        """Adopt a freshly computed array without copying it"""
        t = cls.__new__(cls)
        t.data = np.asarray(array, dtype=np.float64)
        t.requires_grad = False
        t.grad = None
        t._tape = None
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data.copy()

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operators delegate to ops; imported lazily to avoid a cycle.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __abs__(self):
        from . import ops
        return ops.abs_(self)

    def __pow__(self, p):
        from . import ops
        return ops.pow_(self, p)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class _Record:
    __slots__ = ('fn', 'output')

    def __init__(self, fn, output):
        self.fn = fn
        self.output = output


class Tape:
    """Ordered record of differentiable operations for one optimization step"""

    def __init__(self):
        self._records = []
        self._leaves = {}
        self._consumed = False

    def __len__(self):
        return len(self._records)

    def __enter__(self):
        if self._consumed:
            raise TapeError("Cannot record on a consumed tape")
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise TapeError("Tape contexts exited out of order")
        stack.pop()
        return False

    @property
    def consumed(self):
        return self._consumed

    def record(self, fn, output):
        if self._consumed:
            raise TapeError("Cannot record on a consumed tape")
        for parent in fn.parents:
            if parent.requires_grad and parent._tape is not self:
                self._leaves[id(parent)] = parent
        output._tape = self
        self._records.append(_Record(fn, output))

    def clear(self):
        """Release every recorded intermediate"""
        for rec in self._records:
            rec.output._tape = None
        self._records = []
        self._leaves = {}

    def backward(self, loss):
        if self._consumed:
            raise TapeError("backward already ran on this tape")
        if loss._tape is not self:
            raise TapeError("Loss was not produced on this tape")
        if loss.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

        grads = {id(loss): np.ones_like(loss.data)}
        for rec in reversed(self._records):
            g = grads.pop(id(rec.output), None)
            if g is None:
                continue
            parent_grads = rec.fn.backward(g)
            for parent, pg in zip(rec.fn.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

        for key, leaf in self._leaves.items():
            g = grads.get(key)
            leaf.grad = g if g is not None else np.zeros_like(leaf.data)

        self._consumed = True
        self.clear()


def backward(loss):
    """Store d(loss)/d(leaf) on every requires_grad leaf of the loss's tape"""
    tape = loss._tape
    if tape is None:
        raise TapeError("Loss is not attached to a tape; compute it inside `with Tape():`")
    tape.backward(loss)
