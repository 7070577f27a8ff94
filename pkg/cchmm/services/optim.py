from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from cchmm.core.errors import NonFiniteError, ShapeMismatchError
from cchmm.models.params import ParameterStore


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new parameter arrays and a new state."""
    for name, param in params.items():
        grad = grads[name]
        if np.shape(grad) != np.shape(param):
            raise ShapeMismatchError("adam_step", [np.shape(param), np.shape(grad)], name)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError("adam_step", f"gradient of parameter {name}")

    t = state.t + 1
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    updated, moments, second = {}, {}, {}
    for name, param in params.items():
        grad = grads[name]
        m = state.beta1 * state.m.get(name, np.zeros_like(param)) + (1.0 - state.beta1) * grad
        v = state.beta2 * state.v.get(name, np.zeros_like(param)) + (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = param - state.lr * m_hat / (np.sqrt(v_hat) + state.eps_adam)
        moments[name], second[name] = m, v

    next_state = AdamState(
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        eps_adam=state.eps_adam,
        t=t,
        m=moments,
        v=second,
    )
    return updated, next_state


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale every gradient by min(1, max_norm/‖g‖₂) with the norm taken over all of them."""
    norm = global_norm(grads)
    factor = min(1.0, max_norm / norm) if norm > 0 else 1.0
    return {name: g * factor for name, g in grads.items()}, norm


class Adam:
    """Adam over a :class:`ParameterStore`, clipping the global gradient norm first."""

    def __init__(
        self,
        store: ParameterStore,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps_adam: float = 1e-8,
        clip_norm: float | None = 5.0,
    ):
        self.store = store
        self.clip_norm = clip_norm
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps_adam=eps_adam)

    def step(self) -> float:
        grads = self.store.grads()
        norm = global_norm(grads)
        if self.clip_norm is not None:
            grads, norm = clip_grad_norm(grads, self.clip_norm)
        params, self.state = adam_step(self.store.arrays(), grads, self.state)
        self.store.assign(params)
        return norm
