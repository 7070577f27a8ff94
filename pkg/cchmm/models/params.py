from typing import Iterator, Mapping

import numpy as np

from cchmm.core.errors import DataFormatError
from cchmm.diffcore import Tensor, ops
from cchmm.diffcore.ops import Operand


class ParameterStore:
    """Named leaf tensors of a model, in creation order.

    Tensors are immutable, so an optimizer step swaps in new leaves through
    :meth:`assign`; layers look their parameters up by name on every call.
    """

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}

    def create(self, name: str, value: np.ndarray) -> str:
        if name in self._tensors:
            raise KeyError(f"parameter {name!r} already exists")
        self._tensors[name] = Tensor(value, requires_grad=True, name=name)
        return name

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def count(self) -> int:
        return int(sum(t.data.size for t in self._tensors.values()))

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.numpy() for name, t in self._tensors.items()}

    def grads(self) -> dict[str, np.ndarray]:
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data)) for name, t in self._tensors.items()
        }

    def assign(self, values: Mapping[str, np.ndarray]) -> None:
        for name, value in values.items():
            current = self._tensors[name]
            if np.shape(value) != current.shape:
                raise DataFormatError(
                    f"parameter {name!r} expects shape {current.shape}, got {np.shape(value)}", array=name
                )
            self._tensors[name] = Tensor(value, requires_grad=True, name=name)

    def bind(self, tensors: Mapping[str, Tensor]) -> None:
        """Install externally created leaves (used by gradient checks)."""
        for name, tensor in tensors.items():
            if name not in self._tensors:
                raise KeyError(name)
            self._tensors[name] = tensor

    def load(self, values: Mapping[str, np.ndarray]) -> None:
        missing = set(self._tensors) - set(values)
        unexpected = set(values) - set(self._tensors)
        if missing or unexpected:
            raise DataFormatError(
                f"checkpoint does not match model: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
            )
        self.assign(values)

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.zero_grad()


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / max(fan_in + fan_out, 1))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear:
    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        bias_init: float = 0.0,
    ):
        self.store = store
        self.weight = store.create(f"{prefix}.W", glorot(rng, in_dim, out_dim))
        self.bias = store.create(f"{prefix}.b", np.full(out_dim, bias_init))

    def __call__(self, x: Operand) -> Tensor:
        return ops.linear(x, self.store[self.weight], self.store[self.bias])


class TwoLayer:
    """FC(tanh(FC(x)))."""

    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        in_dim: int,
        hidden: int,
        out_dim: int,
        rng: np.random.Generator,
    ):
        self.inner = Linear(store, f"{prefix}.fc1", in_dim, hidden, rng)
        self.outer = Linear(store, f"{prefix}.fc2", hidden, out_dim, rng)

    def __call__(self, x: Operand) -> Tensor:
        return self.outer(ops.tanh(self.inner(x)))
