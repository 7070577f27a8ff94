"""Dense float64 tensors and the define-by-run computation tape.

Every primitive in :mod:`cchmm.diffcore.ops` records one node on the active
:class:`ComputationTape`. :func:`backward` walks the nodes in reverse
insertion order, so gradient accumulation order is fixed by program order.
"""

from __future__ import annotations

from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from cchmm.core.errors import NonFiniteError, TapeError

GradFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_ACTIVE_TAPE: ContextVar["ComputationTape | None"] = ContextVar("active_tape", default=None)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_tape", "_is_leaf")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        array = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(name or "tensor constructor")
        array.setflags(write=False)
        self.data = array
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._tape: ComputationTape | None = None
        self._is_leaf = True

    @classmethod
    def _from_op(cls, value: np.ndarray, tape: "ComputationTape | None", requires_grad: bool) -> "Tensor":
        out = cls.__new__(cls)
        value = np.ascontiguousarray(value, dtype=np.float64)
        value.setflags(write=False)
        out.data = value
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        out._tape = tape
        out._is_leaf = False
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self._is_leaf

    def numpy(self) -> np.ndarray:
        return np.array(self.data)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # operator sugar; the primitives live in ops
    def __add__(self, other):
        from cchmm.diffcore import ops

        return ops.add(self, other)

    def __radd__(self, other):
        from cchmm.diffcore import ops

        return ops.add(other, self)

    def __sub__(self, other):
        from cchmm.diffcore import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from cchmm.diffcore import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from cchmm.diffcore import ops

        return ops.mul(self, other)

    def __rmul__(self, other):
        from cchmm.diffcore import ops

        return ops.mul(other, self)

    def __neg__(self):
        from cchmm.diffcore import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from cchmm.diffcore import ops

        return ops.matmul(self, other)


@dataclass(frozen=True)
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward_fn: GradFn


class ComputationTape:
    """Ordered record of operations; used as a context manager to become active."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.consumed = False
        self._tokens: list = []

    def __enter__(self) -> "ComputationTape":
        self._tokens.append(_ACTIVE_TAPE.set(self))
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, backward_fn: GradFn) -> None:
        self.nodes.append(Node(op=op, inputs=inputs, output=output, backward_fn=backward_fn))


def active_tape() -> ComputationTape | None:
    return _ACTIVE_TAPE.get()


def backward(tape: ComputationTape, root: Tensor, adjoints: dict[int, np.ndarray] | None = None) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every leaf that requires it.

    A root that does not require gradients is a constant: the tape is consumed
    and every gradient stays ``None``. A root that requires gradients must have
    been recorded on ``tape``. When ``adjoints`` is given it receives
    d(root)/d(output) for every node output reached, keyed by ``id(output)``.
    """
    if root.data.size != 1:
        raise TapeError(f"backward needs a scalar root, got shape {root.shape}")
    if root.requires_grad and root._tape is not tape:
        raise TapeError("backward root requires gradients but was not recorded on this tape")
    if tape.consumed:
        raise TapeError("tape already consumed by a previous backward()")
    tape.consumed = True
    if not root.requires_grad:
        return

    pending: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(tape.nodes):
        upstream = pending.pop(id(node.output), None)
        if upstream is None:
            continue
        if adjoints is not None:
            adjoints[id(node.output)] = upstream
        input_grads = node.backward_fn(upstream)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if tensor.is_leaf:
                tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
            else:
                key = id(tensor)
                pending[key] = grad if key not in pending else pending[key] + grad
    if pending:
        raise TapeError(f"{len(pending)} intermediate tensor(s) reached by backward were computed outside this tape")
