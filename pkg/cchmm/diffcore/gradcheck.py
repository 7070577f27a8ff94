from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from cchmm.diffcore.ops import shifted_output
from cchmm.diffcore.tensor import ComputationTape, Tensor, backward

ScalarFunction = Callable[[dict[str, Tensor]], Tensor]

LOCATE_TOLERANCE = 1e-3


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_err: float
    worst_leaf: str | None
    per_leaf: dict[str, float] = field(default_factory=dict)
    checked_elements: int = 0


@dataclass(frozen=True)
class OpFault:
    op: str
    index: int
    rel_err: float


def _evaluate(f: ScalarFunction, arrays: Mapping[str, np.ndarray]) -> float:
    tensors = {name: Tensor(value) for name, value in arrays.items()}
    return f(tensors).item()


def _element_indices(size: int, max_elements: int | None) -> np.ndarray:
    if not max_elements or max_elements >= size:
        return np.arange(size)
    return np.unique(np.linspace(0, size - 1, max_elements).round().astype(int))


def check_gradients(
    f: ScalarFunction,
    leaves: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    max_elements: int | None = None,
) -> GradCheckResult:
    """Compare backward() against central differences for every leaf in ``leaves``.

    ``f`` receives fresh leaf tensors keyed like ``leaves`` and returns a scalar.
    The relative error of a leaf is max|analytic - numeric| over the checked
    entries divided by the larger of the two gradients' max magnitudes.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = {name: np.array(value, dtype=np.float64) for name, value in leaves.items()}

    tensors = {name: Tensor(value, requires_grad=True, name=name) for name, value in base.items()}
    with ComputationTape() as tape:
        root = f(tensors)
    backward(tape, root)
    analytic = {
        name: (t.grad if t.grad is not None else np.zeros_like(base[name])) for name, t in tensors.items()
    }

    per_leaf: dict[str, float] = {}
    checked = 0
    for name, value in base.items():
        indices = _element_indices(value.size, max_elements)
        numeric = np.zeros(indices.size)
        for position, flat in enumerate(indices):
            shifted = dict(base)
            plus = value.copy()
            plus.flat[flat] += eps
            shifted[name] = plus
            upper = _evaluate(f, shifted)
            minus = value.copy()
            minus.flat[flat] -= eps
            shifted[name] = minus
            lower = _evaluate(f, shifted)
            numeric[position] = (upper - lower) / (2.0 * eps)
        exact = analytic[name].reshape(-1)[indices]
        denominator = max(np.max(np.abs(exact), initial=0.0), np.max(np.abs(numeric), initial=0.0), 1e-8)
        per_leaf[name] = float(np.max(np.abs(exact - numeric), initial=0.0) / denominator)
        checked += indices.size

    worst = max(per_leaf, key=per_leaf.get) if per_leaf else None
    return GradCheckResult(
        max_rel_err=per_leaf[worst] if worst is not None else 0.0,
        worst_leaf=worst,
        per_leaf=per_leaf,
        checked_elements=checked,
    )


def _relative(analytic: float, numeric: float, floor: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def locate_faulty_op(
    f: ScalarFunction,
    leaves: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    tolerance: float = LOCATE_TOLERANCE,
    seed: int = 0,
) -> OpFault | None:
    """Name the recorded op whose backward disagrees with central differences.

    The adjoint d(root)/d(x) of every node output and leaf is checked along one
    random direction by re-running ``f`` with that value shifted by ±eps.
    Adjoints are produced in reverse tape order, so the fault is pinned on the
    last node whose own output adjoint agrees while an input adjoint does not.
    Returns None when every adjoint agrees.
    """
    base = {name: np.array(value, dtype=np.float64) for name, value in leaves.items()}

    def fresh() -> dict[str, Tensor]:
        return {name: Tensor(value, requires_grad=True, name=name) for name, value in base.items()}

    tensors = fresh()
    adjoints: dict[int, np.ndarray] = {}
    with ComputationTape() as tape:
        root = f(tensors)
    backward(tape, root, adjoints)
    if not root.requires_grad:
        return None
    floor = 1e-6 * max(1.0, abs(root.item()))
    rng = np.random.default_rng(seed)

    def node_root(index: int, delta: np.ndarray) -> float:
        with ComputationTape(), shifted_output(index, delta):
            return f(fresh()).item()

    def leaf_root(name: str, delta: np.ndarray) -> float:
        shifted = fresh()
        shifted[name] = Tensor(base[name] + delta, requires_grad=True, name=name)
        with ComputationTape():
            return f(shifted).item()

    node_index = {id(node.output): k for k, node in enumerate(tape.nodes)}
    leaf_name = {id(t): name for name, t in tensors.items()}
    errors: dict[int, float] = {}

    def error_of(tensor: Tensor) -> float:
        key = id(tensor)
        if key in errors:
            return errors[key]
        direction = rng.standard_normal(tensor.shape)
        if key in node_index:
            adjoint = adjoints.get(key)
            index = node_index[key]
            upper = node_root(index, eps * direction)
            lower = node_root(index, -eps * direction)
        else:
            adjoint = tensor.grad
            upper = leaf_root(leaf_name[key], eps * direction)
            lower = leaf_root(leaf_name[key], -eps * direction)
        analytic = 0.0 if adjoint is None else float(np.sum(adjoint * direction))
        errors[key] = _relative(analytic, (upper - lower) / (2.0 * eps), floor)
        return errors[key]

    for index in range(len(tape.nodes) - 1, -1, -1):
        node = tape.nodes[index]
        if id(node.output) not in adjoints or error_of(node.output) >= tolerance:
            continue
        checked = [t for t in node.inputs if id(t) in node_index or id(t) in leaf_name]
        worst = max((error_of(t) for t in checked), default=0.0)
        if worst >= tolerance:
            return OpFault(op=node.op, index=index, rel_err=worst)
    return None
