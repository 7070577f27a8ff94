from dataclasses import dataclass, field

import numpy as np

from cchmm.core.errors import ShapeMismatchError, ValidationError
from cchmm.diffcore import Tensor, ops
from cchmm.diffcore.ops import Operand

DEGREE_FLOOR = 1e-12


def normalize_adjacency(g: np.ndarray) -> np.ndarray:
    """I + D^-1/2 G D^-1/2, with the degree floored so isolated regions become identity rows."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValidationError(f"adjacency must be square, got shape {g.shape}")
    negative = np.argwhere(g < 0)
    if negative.size:
        i, j = negative[0]
        raise ValidationError(f"adjacency has a negative entry G[{i}][{j}] = {g[i, j]}")
    asymmetric = np.argwhere(g != g.T)
    if asymmetric.size:
        i, j = asymmetric[0]
        raise ValidationError(f"adjacency is not symmetric at G[{i}][{j}] = {g[i, j]} vs G[{j}][{i}] = {g[j, i]}")

    degree = np.maximum(g.sum(axis=1), DEGREE_FLOOR)
    inv_sqrt = 1.0 / np.sqrt(degree)
    return np.eye(g.shape[0]) + inv_sqrt[:, None] * g * inv_sqrt[None, :]


def graph_conv(g_hat: Operand, x: Operand, weight: Operand, bias: Operand) -> Tensor:
    """G_hat · X · W + b over the region axis (second to last) of X."""
    g_hat, x, weight, bias = (ops.as_tensor(t) for t in (g_hat, x, weight, bias))
    if x.ndim < 2 or g_hat.shape != (x.shape[-2], x.shape[-2]):
        raise ShapeMismatchError("graph_conv", [g_hat.shape, x.shape])
    if weight.ndim != 2 or weight.shape[0] != x.shape[-1] or bias.shape != (weight.shape[1],):
        raise ShapeMismatchError("graph_conv", [x.shape, weight.shape, bias.shape])
    return ops.add(ops.matmul(ops.matmul(g_hat, x), weight), bias)


@dataclass(frozen=True)
class RegionGraph:
    g: np.ndarray
    g_hat: np.ndarray = field(init=False)

    def __post_init__(self):
        g = np.array(self.g, dtype=np.float64)
        if np.any(np.diag(g) != 0):
            raise ValidationError("adjacency diagonal must be zero")
        g_hat = normalize_adjacency(g)
        g.setflags(write=False)
        g_hat.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "g_hat", g_hat)
