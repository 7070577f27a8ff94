"""Causal propagation between concept latents and the prior/posterior attention."""

import numpy as np

from cchmm.core.errors import ShapeMismatchError
from cchmm.diffcore import Tensor, ops
from cchmm.diffcore.linalg import solve_small
from cchmm.diffcore.ops import Operand


def causal_adjacency(w_a: Operand, alpha: float) -> Tensor:
    """Ã = ReLU(tanh(alpha·W_A)) with the diagonal forced to zero."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    w_a = ops.as_tensor(w_a)
    k = w_a.shape[0]
    off_diagonal = 1.0 - np.eye(k)
    return ops.mul(ops.relu(ops.tanh(ops.scale(w_a, alpha))), off_diagonal)


def causal_propagate(a_tilde: Operand, eps: Operand) -> Tensor:
    """Solve (I - Ãᵀ)·h = ε along the concept axis (second to last) of ε."""
    a_tilde, eps = ops.as_tensor(a_tilde), ops.as_tensor(eps)
    k = a_tilde.shape[0]
    if a_tilde.shape != (k, k) or eps.ndim < 2 or eps.shape[-2] != k:
        raise ShapeMismatchError("causal_propagate", [a_tilde.shape, eps.shape])

    system = ops.sub(np.eye(k), ops.swapaxes(a_tilde, 0, 1))
    columns = ops.moveaxis(eps, -2, 0)
    flat = ops.reshape(columns, (k, -1))
    h = solve_small(system, flat, context="causal graph near-cyclic with unit gain")
    return ops.moveaxis(ops.reshape(h, columns.shape), 0, -2)


def attention_fuse(z_post_prev: Operand, z_prior: Operand, w_att: Operand) -> Tensor:
    """softmax(z_prev · W_att · z_priorᵀ) · z_prior per region, softmax over the key concepts."""
    z_post_prev, z_prior, w_att = ops.as_tensor(z_post_prev), ops.as_tensor(z_prior), ops.as_tensor(w_att)
    if z_post_prev.shape != z_prior.shape or w_att.shape != (z_prior.shape[-1],) * 2:
        raise ShapeMismatchError("attention_fuse", [z_post_prev.shape, z_prior.shape, w_att.shape])
    scores = ops.matmul(ops.matmul(z_post_prev, w_att), ops.swapaxes(z_prior, -1, -2))
    return ops.matmul(ops.softmax(scores, axis=-1), z_prior)
