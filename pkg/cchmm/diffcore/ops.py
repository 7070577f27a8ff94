"""Differentiable primitives over :class:`~cchmm.diffcore.tensor.Tensor`.

Elementwise binary ops broadcast over leading axes only: the shorter shape
must equal the trailing part of the longer one. Every output is checked for
finiteness before it is recorded.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator, Sequence, Union

import numpy as np

from cchmm.core.errors import NonFiniteError, ShapeMismatchError
from cchmm.diffcore.tensor import GradFn, Tensor, active_tape

Operand = Union[Tensor, np.ndarray, float, int]


def as_tensor(value: Operand) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


_OUTPUT_SHIFT: ContextVar[tuple[int, np.ndarray] | None] = ContextVar("output_shift", default=None)


@contextmanager
def shifted_output(index: int, delta: np.ndarray) -> Iterator[None]:
    """Add ``delta`` to the forward value of the ``index``-th node recorded on the active tape."""
    token = _OUTPUT_SHIFT.set((index, np.asarray(delta, dtype=np.float64)))
    try:
        yield
    finally:
        _OUTPUT_SHIFT.reset(token)


def emit(op: str, inputs: Sequence[Tensor], value: np.ndarray, backward_fn: GradFn) -> Tensor:
    """Wrap a forward value as a tensor and record it when any input needs gradients."""
    if not np.all(np.isfinite(value)):
        shapes = ", ".join(str(tensor.shape) for tensor in inputs)
        raise NonFiniteError(op, f"inputs {shapes}")
    requires_grad = any(tensor.requires_grad for tensor in inputs)
    tape = active_tape()
    tracked = tape is not None and requires_grad
    if tracked:
        shift = _OUTPUT_SHIFT.get()
        if shift is not None and shift[0] == len(tape):
            value = value + shift[1]
    out = Tensor._from_op(value, tape if tracked else None, requires_grad)
    if tracked:
        tape.record(op, tuple(inputs), out, backward_fn)
    return out


def _leading_broadcast(op: str, a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    if a == b:
        return a
    longer, shorter = (a, b) if len(a) >= len(b) else (b, a)
    if longer[len(longer) - len(shorter):] != shorter:
        raise ShapeMismatchError(op, [a, b], "broadcasting is limited to leading axes")
    return longer


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad.reshape(shape)


# elementwise binary


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _leading_broadcast("add", a.shape, b.shape)
    return emit(
        "add",
        (a, b),
        a.data + b.data,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _leading_broadcast("sub", a.shape, b.shape)
    return emit(
        "sub",
        (a, b),
        a.data - b.data,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _leading_broadcast("mul", a.shape, b.shape)
    return emit(
        "mul",
        (a, b),
        a.data * b.data,
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def neg(x: Operand) -> Tensor:
    x = as_tensor(x)
    return emit("neg", (x,), -x.data, lambda g: (-g,))


def scale(x: Operand, factor: float) -> Tensor:
    x = as_tensor(x)
    factor = float(factor)
    return emit("scale", (x,), x.data * factor, lambda g: (g * factor,))


# linear algebra


def matmul(a: Operand, b: Operand) -> Tensor:
    """Batched matrix product; batch axes broadcast over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError("matmul", [a.shape, b.shape])
    _leading_broadcast("matmul", a.shape[:-2], b.shape[:-2])

    def grad_fn(g):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return emit("matmul", (a, b), np.matmul(a.data, b.data), grad_fn)


def linear(x: Operand, weight: Operand, bias: Operand | None = None) -> Tensor:
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


def trace(x: Operand) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ShapeMismatchError("trace", [x.shape], "needs a square matrix")
    eye = np.eye(x.shape[0])
    return emit("trace", (x,), np.array(np.trace(x.data)), lambda g: (g * eye,))


def matrix_power(x: Operand, n: int) -> Tensor:
    """x^n by n-1 recorded multiplications."""
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ShapeMismatchError("matrix_power", [x.shape], "needs a square matrix")
    if n < 1:
        raise ValueError("matrix_power needs n >= 1")
    out = x
    for _ in range(n - 1):
        out = matmul(out, x)
    return out


# elementwise unary


def sigmoid(x: Operand) -> Tensor:
    x = as_tensor(x)
    value = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return emit("sigmoid", (x,), value, lambda g: (g * value * (1.0 - value),))


def tanh(x: Operand) -> Tensor:
    x = as_tensor(x)
    value = np.tanh(x.data)
    return emit("tanh", (x,), value, lambda g: (g * (1.0 - value * value),))


def relu(x: Operand) -> Tensor:
    x = as_tensor(x)
    mask = (x.data > 0).astype(np.float64)
    return emit("relu", (x,), x.data * mask, lambda g: (g * mask,))


def exp(x: Operand) -> Tensor:
    x = as_tensor(x)
    value = np.exp(x.data)
    return emit("exp", (x,), value, lambda g: (g * value,))


def log(x: Operand) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise NonFiniteError("log", "non-positive input")
    return emit("log", (x,), np.log(x.data), lambda g: (g / x.data,))


def square(x: Operand) -> Tensor:
    x = as_tensor(x)
    return emit("square", (x,), x.data * x.data, lambda g: (2.0 * g * x.data,))


def clip(x: Operand, low: float, high: float) -> Tensor:
    x = as_tensor(x)
    inside = ((x.data >= low) & (x.data <= high)).astype(np.float64)
    return emit("clip", (x,), np.clip(x.data, low, high), lambda g: (g * inside,))


def softmax(x: Operand, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    weights = np.exp(shifted)
    value = weights / weights.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        return (value * (g - (g * value).sum(axis=axis, keepdims=True)),)

    return emit("softmax", (x,), value, grad_fn)


# reductions


def sum(x: Operand, axis: int | tuple[int, ...] | None = None) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    value = np.sum(x.data, axis=axis)

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return emit("sum", (x,), np.asarray(value), grad_fn)


def mean(x: Operand, axis: int | tuple[int, ...] | None = None) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        count = x.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([x.shape[a] for a in axes]))
    return scale(sum(x, axis=axis), 1.0 / count)


def squared_error(prediction: Operand, target: Operand) -> Tensor:
    """Sum of elementwise squared differences."""
    prediction, target = as_tensor(prediction), as_tensor(target)
    if prediction.shape != target.shape:
        raise ShapeMismatchError("squared_error", [prediction.shape, target.shape])
    diff = prediction.data - target.data

    def grad_fn(g):
        return 2.0 * g * diff, -2.0 * g * diff

    return emit("squared_error", (prediction, target), np.array(np.sum(diff * diff)), grad_fn)


# structural


def concat(tensors: Sequence[Operand], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ndim = tensors[0].ndim
    axis = axis % ndim
    rest = tensors[0].shape[:axis] + tensors[0].shape[axis + 1:]
    for t in tensors[1:]:
        if t.ndim != ndim or t.shape[:axis] + t.shape[axis + 1:] != rest:
            raise ShapeMismatchError("concat", [t.shape for t in tensors])
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad_fn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return emit("concat", tuple(tensors), np.concatenate([t.data for t in tensors], axis=axis), grad_fn)


def stack(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if any(t.shape != tensors[0].shape for t in tensors):
        raise ShapeMismatchError("stack", [t.shape for t in tensors])
    value = np.stack([t.data for t in tensors], axis=axis)
    axis = axis % value.ndim

    def grad_fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return emit("stack", tuple(tensors), value, grad_fn)


def select(x: Operand, index: int, axis: int) -> Tensor:
    """Pick one entry along ``axis``, dropping that axis."""
    x = as_tensor(x)
    axis = axis % x.ndim
    if not -x.shape[axis] <= index < x.shape[axis]:
        raise ShapeMismatchError("select", [x.shape], f"index {index} out of range on axis {axis}")

    def grad_fn(g):
        full = np.zeros(x.shape)
        slicer = [slice(None)] * x.ndim
        slicer[axis] = index
        full[tuple(slicer)] = g
        return (full,)

    return emit("select", (x,), np.take(x.data, index, axis=axis), grad_fn)


def slice_axis(x: Operand, start: int, stop: int, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    axis = axis % x.ndim
    if not 0 <= start < stop <= x.shape[axis]:
        raise ShapeMismatchError("slice_axis", [x.shape], f"range {start}:{stop} on axis {axis}")
    slicer = [slice(None)] * x.ndim
    slicer[axis] = slice(start, stop)
    slicer = tuple(slicer)

    def grad_fn(g):
        full = np.zeros(x.shape)
        full[slicer] = g
        return (full,)

    return emit("slice_axis", (x,), x.data[slicer], grad_fn)


def reshape(x: Operand, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        value = x.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeMismatchError("reshape", [x.shape, tuple(shape)]) from exc
    return emit("reshape", (x,), value, lambda g: (g.reshape(x.shape),))


def swapaxes(x: Operand, axis1: int, axis2: int) -> Tensor:
    x = as_tensor(x)
    return emit("swapaxes", (x,), np.swapaxes(x.data, axis1, axis2), lambda g: (np.swapaxes(g, axis1, axis2),))


def moveaxis(x: Operand, source: int, destination: int) -> Tensor:
    x = as_tensor(x)
    value = np.moveaxis(x.data, source, destination)
    return emit("moveaxis", (x,), value, lambda g: (np.moveaxis(g, destination, source),))
