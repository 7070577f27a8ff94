from dataclasses import dataclass

import numpy as np

from cchmm.core.errors import ShapeMismatchError
from cchmm.diffcore import Tensor, ops
from cchmm.diffcore.ops import Operand

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0


@dataclass(frozen=True)
class GaussianParams:
    """Diagonal Gaussian; ``logvar`` is already clamped to [LOGVAR_MIN, LOGVAR_MAX]."""

    mean: Tensor
    logvar: Tensor

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mean.shape

    @classmethod
    def standard_normal(cls, shape: tuple[int, ...]) -> "GaussianParams":
        return cls(mean=Tensor(np.zeros(shape)), logvar=Tensor(np.zeros(shape)))

    @classmethod
    def stack(cls, parts: list["GaussianParams"], axis: int = -2) -> "GaussianParams":
        return cls(
            mean=ops.stack([p.mean for p in parts], axis=axis),
            logvar=ops.stack([p.logvar for p in parts], axis=axis),
        )


def clamp_logvar(raw: Operand) -> Tensor:
    return ops.clip(raw, LOGVAR_MIN, LOGVAR_MAX)


def reparameterize(mean: Operand, logvar: Operand, noise: Operand) -> Tensor:
    """mean + exp(0.5·logvar) ⊙ noise."""
    mean, logvar, noise = ops.as_tensor(mean), ops.as_tensor(logvar), ops.as_tensor(noise)
    if not mean.shape == logvar.shape == noise.shape:
        raise ShapeMismatchError("reparameterize", [mean.shape, logvar.shape, noise.shape])
    return ops.add(mean, ops.mul(ops.exp(ops.scale(logvar, 0.5)), noise))


def sample(dist: GaussianParams, noise: np.ndarray | None) -> Tensor:
    """A reparameterized draw, or the mean when no noise is supplied."""
    if noise is None:
        return dist.mean
    return reparameterize(dist.mean, dist.logvar, noise)
