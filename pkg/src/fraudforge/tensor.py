"""Dense tensors with define-by-run reverse-mode differentiation.

Every op builds a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients. Calling
:meth:`Tensor.backward` linearises the graph into a :class:`Tape` and walks
it in reverse.

Model math runs in float32 by default. :func:`precision` switches the dtype
used for newly created tensors, which gradient checks use to run in float64.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import AxisOutOfRange, NotScalar, ShapeMismatch

EPS = 1e-8
LEAKY_SLOPE = 0.2

_state = threading.local()


def default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def precision(dtype):
    """Create new tensors with ``dtype`` inside the block."""
    old = default_dtype()
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = old


@contextmanager
def no_grad():
    """Disable graph recording (inference / sampling)."""
    old = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = old


ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.array(data, dtype=dtype or default_dtype(), copy=True)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self.op = "leaf"

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple, backward, op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.op = op
        needs = grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = needs
        out._parents = parents if needs else ()
        out._backward = backward if needs else None
        return out

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            _not_scalar(self)
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.requires_grad = False
        out.grad = None
        out._parents = ()
        out._backward = None
        out.op = "leaf"
        return out

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    # -- operators -----------------------------------------------------
    def __add__(self, other):
        return elementwise("add", self, other)

    def __radd__(self, other):
        return elementwise("add", self, other)

    def __sub__(self, other):
        return elementwise("sub", self, other)

    def __rsub__(self, other):
        return elementwise("add", neg(self), other)

    def __mul__(self, other):
        return elementwise("mul", self, other)

    def __rmul__(self, other):
        return elementwise("mul", self, other)

    def __truediv__(self, other):
        return elementwise("div", self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p: float):
        return power(self, p)

    def sum(self, axis=None, keepdims=False):
        return reduce("sum", self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce("mean", self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    # -- differentiation -----------------------------------------------
    def backward(self) -> None:
        """Populate ``.grad`` on every reachable leaf that requires grad.

        Gradients accumulate: a leaf used several times sums its
        contributions, and repeated ``backward`` calls add up until the
        gradient is cleared.
        """
        if self.data.size != 1:
            _not_scalar(self)
        tape = Tape.from_output(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(tape.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def _not_scalar(t: Tensor):
    raise NotScalar(f"expected a scalar tensor, got shape {t.shape}")


class Tape:
    """Topologically ordered view of the graph feeding one output."""

    def __init__(self, nodes: list):
        self.nodes = nodes

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order: list = []
        seen: set = set()
        stack = [(out, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)


def as_tensor(x: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(x, dtype=dtype)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _guard(den: np.ndarray) -> np.ndarray:
    return den + np.where(den >= 0, EPS, -EPS).astype(den.dtype)


# -- elementwise ---------------------------------------------------------
def elementwise(op: str, a: ArrayLike, b: ArrayLike) -> Tensor:
    """Binary op where ``b`` broadcasts onto ``a`` (trailing-dimension rule)."""
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    try:
        out_shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        out_shape = None
    if out_shape != a.shape:
        raise ShapeMismatch(f"{op}: cannot broadcast {b.shape} onto {a.shape}")
    ad, bd = a.data, b.data
    if op == "add":
        data = ad + bd

        def backward(g):
            return g, _unbroadcast(g, bd.shape)

    elif op == "sub":
        data = ad - bd

        def backward(g):
            return g, _unbroadcast(-g, bd.shape)

    elif op == "mul":
        data = ad * bd

        def backward(g):
            return g * bd, _unbroadcast(g * ad, bd.shape)

    elif op == "div":
        den = _guard(bd)
        data = ad / den

        def backward(g):
            return g / den, _unbroadcast(-g * ad / (den * den), bd.shape)

    else:
        raise ValueError(f"unknown elementwise op {op!r}")
    return Tensor._from_op(data.astype(ad.dtype, copy=False), (a, b), backward, op)


def neg(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,), "neg")


def power(a: Tensor, p: float) -> Tensor:
    ad = a.data
    data = ad ** p

    def backward(g):
        return (g * p * ad ** (p - 1),)

    return Tensor._from_op(data, (a,), backward, "pow")


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)
    return Tensor._from_op(data, (a,), lambda g: (g * data,), "exp")


def log(a: Tensor) -> Tensor:
    arg = a.data + a.data.dtype.type(EPS)
    return Tensor._from_op(np.log(arg), (a,), lambda g: (g / arg,), "log")


# -- linear algebra ------------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; leading (batch) dimensions broadcast like ``np.matmul``."""
    a, b = as_tensor(a), as_tensor(b, like=as_tensor(a))
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    data = ad @ bd

    def backward(g):
        da = g @ np.swapaxes(bd, -1, -2)
        db = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(da, ad.shape), _unbroadcast(db, bd.shape)

    return Tensor._from_op(data, (a, b), backward, "matmul")


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from None
    old = a.shape
    return Tensor._from_op(data, (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    data = np.transpose(a.data, axes)
    return Tensor._from_op(data, (a,), lambda g: (np.transpose(g, inverse),), "transpose")


# -- reductions ----------------------------------------------------------
def _check_axis(a: Tensor, axis):
    if axis is None:
        return None
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    norm = []
    for ax in axes:
        if not -a.ndim <= ax < a.ndim:
            raise AxisOutOfRange(f"axis {ax} out of range for shape {a.shape}")
        norm.append(ax % a.ndim)
    return tuple(norm)


def reduce(op: str, a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Sum or mean; accumulation happens in float64."""
    axes = _check_axis(a, axis)
    ad = a.data
    acc = ad.astype(np.float64).sum(axis=axes, keepdims=True)
    count = ad.size if axes is None else int(np.prod([ad.shape[i] for i in axes]))
    if op == "mean":
        acc = acc / max(count, 1)
    elif op != "sum":
        raise ValueError(f"unknown reduction {op!r}")
    kept = acc.astype(ad.dtype)
    data = kept if keepdims else kept.reshape(
        tuple(n for i, n in enumerate(ad.shape) if axes is not None and i not in axes)
    )
    scale = 1.0 / max(count, 1) if op == "mean" else 1.0

    def backward(g):
        g = g.reshape(kept.shape)
        return (np.broadcast_to(g * ad.dtype.type(scale), ad.shape).copy(),)

    return Tensor._from_op(data, (a,), backward, op)


# -- activations ---------------------------------------------------------
_GELU_C = math.sqrt(2.0 / math.pi)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activation(op: str, a: Tensor) -> Tensor:
    x = a.data
    if op == "relu":
        mask = x > 0
        data = np.where(mask, x, 0).astype(x.dtype)

        def backward(g):
            return (g * mask,)

    elif op == "leaky_relu":
        slope = np.where(x > 0, 1.0, LEAKY_SLOPE).astype(x.dtype)
        data = x * slope

        def backward(g):
            return (g * slope,)

    elif op == "sigmoid":
        data = _sigmoid(x)

        def backward(g):
            return (g * data * (1 - data),)

    elif op == "tanh":
        data = np.tanh(x)

        def backward(g):
            return (g * (1 - data * data),)

    elif op == "gelu":
        # tanh approximation
        inner = _GELU_C * (x + 0.044715 * x ** 3)
        t = np.tanh(inner)
        data = 0.5 * x * (1 + t)

        def backward(g):
            dinner = _GELU_C * (1 + 3 * 0.044715 * x * x)
            return (g * (0.5 * (1 + t) + 0.5 * x * (1 - t * t) * dinner),)

    else:
        raise ValueError(f"unknown activation {op!r}")
    return Tensor._from_op(data.astype(x.dtype, copy=False), (a,), backward, op)


def relu(a):
    return activation("relu", a)


def leaky_relu(a):
    return activation("leaky_relu", a)


def sigmoid(a):
    return activation("sigmoid", a)


def tanh(a):
    return activation("tanh", a)


def gelu(a):
    return activation("gelu", a)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    (ax,) = _check_axis(a, axis)
    x = a.data
    shifted = x - x.max(axis=ax, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=ax, keepdims=True)

    def backward(g):
        return (data * (g - (g * data).sum(axis=ax, keepdims=True)),)

    return Tensor._from_op(data, (a,), backward, "softmax")


# -- losses --------------------------------------------------------------
def loss(op: str, pred: Tensor, target: ArrayLike) -> Tensor:
    """Mean BCE-from-logits or mean squared error, as a scalar tensor."""
    target = as_tensor(target, like=pred)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"{op}: pred {pred.shape} vs target {target.shape}")
    x, t = pred.data, target.data
    n = max(x.size, 1)
    if op == "bce_with_logits":
        per = np.maximum(x, 0) - x * t + np.log1p(np.exp(-np.abs(x)))
        value = per.astype(np.float64).sum() / n

        def backward(g):
            return (g * (_sigmoid(x) - t) / n, g * (-x) / n)

    elif op == "mse":
        diff = x - t
        value = (diff.astype(np.float64) ** 2).sum() / n

        def backward(g):
            d = g * 2 * diff / n
            return (d, -d)

    else:
        raise ValueError(f"unknown loss {op!r}")
    data = np.asarray(value, dtype=x.dtype)
    return Tensor._from_op(data, (pred, target), backward, op)


def bce_with_logits(pred, target):
    return loss("bce_with_logits", pred, target)


def mse(pred, target):
    return loss("mse", pred, target)


def zeros_like(t: Tensor) -> Tensor:
    return Tensor(np.zeros_like(t.data))


def ones_like(t: Tensor) -> Tensor:
    return Tensor(np.ones_like(t.data))


def parameters_finite(params: Iterable[Tensor]) -> bool:
    return all(np.isfinite(p.data).all() for p in params)
