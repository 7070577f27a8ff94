"""Training losses: reconstruction, KL terms of the ELBO, prediction error and the acyclicity penalty."""

from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from cchmm.core.errors import NonFiniteError, ShapeMismatchError
from cchmm.diffcore import Tensor, ops
from cchmm.diffcore.ops import Operand
from cchmm.models.concepts import MODALITIES
from cchmm.models.data import WindowBatch
from cchmm.models.gaussian import GaussianParams
from cchmm.models.network import RolloutOutput
from cchmm.schemas.reports import LossReport

Frame = Mapping[str, Operand]


def _total(terms: Sequence[Tensor]) -> Tensor:
    return reduce(ops.add, terms)


def gaussian_kl(q: GaussianParams, p: GaussianParams) -> Tensor:
    """KL(q || p) for diagonal Gaussians, summed over concepts and dimensions, averaged over regions and batch."""
    if q.shape != p.shape:
        raise ShapeMismatchError("gaussian_kl", [q.shape, p.shape])
    variance_ratio = ops.exp(ops.sub(q.logvar, p.logvar))
    shift = ops.mul(ops.square(ops.sub(q.mean, p.mean)), ops.exp(ops.neg(p.logvar)))
    per_element = ops.scale(
        ops.sub(ops.add(ops.add(ops.sub(p.logvar, q.logvar), variance_ratio), shift), 1.0),
        0.5,
    )
    return ops.scale(ops.sum(per_element), 1.0 / int(np.prod(q.shape[:-2])))


def _squared(predictions: Sequence[Frame] | Frame, targets: Sequence[Frame] | Frame, op: str) -> Tensor:
    if isinstance(predictions, Mapping):
        predictions, targets = [predictions], [targets]
    if len(predictions) != len(targets) or not predictions:
        raise ShapeMismatchError(op, [(len(predictions),), (len(targets),)], "step counts differ")
    terms = []
    for predicted, target in zip(predictions, targets):
        for modality in MODALITIES:
            x_hat, x = ops.as_tensor(predicted[modality]), ops.as_tensor(target[modality])
            if x_hat.shape != x.shape:
                raise ShapeMismatchError(op, [x_hat.shape, x.shape], modality)
            terms.append(ops.scale(ops.squared_error(x_hat, x), 1.0 / int(np.prod(x.shape[:-1]))))
    return _total(terms)


def recon_loss(reconstructions: Sequence[Frame] | Frame, observations: Sequence[Frame] | Frame) -> Tensor:
    """Unit-variance Gaussian NLL without constants: 0.5·Σ‖x̂ − x‖², averaged over regions and batch."""
    return ops.scale(_squared(reconstructions, observations, "recon_loss"), 0.5)


def pred_loss(predictions: Sequence[Frame] | Frame, observations: Sequence[Frame] | Frame) -> Tensor:
    return _squared(predictions, observations, "pred_loss")


def acyclicity(a_tilde: Operand) -> Tensor:
    """tr[(I + Ã∘Ã)^K] − K."""
    a_tilde = ops.as_tensor(a_tilde)
    k = a_tilde.shape[0]
    if a_tilde.shape != (k, k):
        raise ShapeMismatchError("acyclicity", [a_tilde.shape])
    return ops.sub(ops.trace(ops.matrix_power(ops.add(np.eye(k), ops.square(a_tilde)), k)), float(k))


def total_loss(rollout: RolloutOutput, batch: WindowBatch, weight: float = 1.0) -> tuple[Tensor, LossReport]:
    """recon + KL(ε) + KL(z) + prediction + λ·acyclicity over one batch of windows.

    Without a prior network both KL terms are taken against a standard normal.
    """
    observed = [batch.step_observations(t) for t in range(batch.history)]
    recon = recon_loss([step.reconstruction for step in rollout.steps], observed)

    kl_eps_terms, kl_z_terms = [], []
    for step in rollout.steps:
        posterior = step.posterior
        if step.prior is None:
            reference_eps = reference_z = GaussianParams.standard_normal(posterior.eps_dist.shape)
        else:
            reference_eps, reference_z = step.prior.eps_dist, step.prior.z_dist
        kl_eps_terms.append(gaussian_kl(posterior.eps_dist, reference_eps))
        kl_z_terms.append(gaussian_kl(posterior.z_dist, reference_z))
    kl_eps, kl_z = _total(kl_eps_terms), _total(kl_z_terms)

    pred = pred_loss(
        [step.prediction for step in rollout.steps] + [rollout.forecast],
        observed + [batch.next_observations],
    )
    penalty = acyclicity(rollout.a_tilde)

    components = {"recon_nll": recon, "kl_eps": kl_eps, "kl_z": kl_z, "pred_l2": pred, "acyclicity": penalty}
    for name, value in components.items():
        if not np.isfinite(value.item()):
            raise NonFiniteError("total_loss", f"component {name} is {value.item()}")

    total = _total([recon, kl_eps, kl_z, pred, ops.scale(penalty, weight)])
    report = LossReport(**{name: value.item() for name, value in components.items()}, total=total.item())
    return total, report
