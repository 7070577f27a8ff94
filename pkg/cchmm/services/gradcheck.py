import logging
from dataclasses import dataclass

import numpy as np

from cchmm.diffcore import Tensor, check_gradients, locate_faulty_op
from cchmm.models.concepts import MODALITIES, MODALITY_CHANNELS
from cchmm.models.data import WindowBatch
from cchmm.models.graph import normalize_adjacency
from cchmm.models.network import CCHMM
from cchmm.models.objective import total_loss
from cchmm.schemas.reports import GradientCheckReport
from cchmm.schemas.training import TrainConfig, Variant
from cchmm.services.variants import apply_variant

logger = logging.getLogger(__name__)

GRADCHECK_TOLERANCE = 1e-4


@dataclass(frozen=True)
class CheckSize:
    n_regions: int
    latent_dim: int
    history: int
    batch: int
    condition_dim: int


SIZES = {"small": CheckSize(n_regions=3, latent_dim=4, history=2, batch=2, condition_dim=3)}


def parameter_group(name: str) -> str:
    """First two dotted components: ``posterior.bike``, ``causal.W_A``, ``generator.v``, ..."""
    return ".".join(name.split(".")[:2])


def check_batch(size: CheckSize, rng: np.random.Generator) -> tuple[WindowBatch, np.ndarray]:
    b, t, n = size.batch, size.history, size.n_regions
    observations = {m: rng.standard_normal((b, t, n, MODALITY_CHANNELS[m])) for m in MODALITIES}
    batch = WindowBatch(
        conditions=rng.standard_normal((b, t, n, size.condition_dim)),
        observations=observations,
        next_conditions=rng.standard_normal((b, n, size.condition_dim)),
        next_observations={m: rng.standard_normal((b, n, MODALITY_CHANNELS[m])) for m in MODALITIES},
        target_indices=np.arange(b) + t,
    )
    g = rng.random((n, n))
    g = np.triu(g, 1)
    return batch, normalize_adjacency(g + g.T)


class GradientCheckService:
    """Finite-difference check of the total loss against every parameter group of a tiny model."""

    def __init__(
        self,
        size: str = "small",
        variant: Variant = Variant.full,
        seed: int = 0,
        eps: float = 1e-5,
        max_elements: int | None = None,
        tolerance: float = GRADCHECK_TOLERANCE,
    ):
        self.size = SIZES[size]
        self.eps = eps
        self.max_elements = max_elements
        self.tolerance = tolerance
        self.seed = seed
        config = TrainConfig(latent_dim=self.size.latent_dim).with_variant(variant)
        spec = apply_variant(config, self.size.condition_dim, self.size.n_regions)
        self.model = CCHMM(spec, seed=seed)
        self.batch, self.g_hat = check_batch(self.size, np.random.default_rng([seed, 3]))

    def loss(self, leaves: dict[str, Tensor]) -> Tensor:
        self.model.params.bind(leaves)
        # the same noise on every evaluation keeps the loss a deterministic function of the leaves
        noise = np.random.default_rng([self.seed, 4])
        outputs = self.model.rollout(self.batch, self.g_hat, mode="train", rng=noise)
        total, _ = total_loss(outputs, self.batch)
        return total

    def groups(self) -> dict[str, list[str]]:
        grouped: dict[str, list[str]] = {}
        for name in self.model.params.names():
            grouped.setdefault(parameter_group(name), []).append(name)
        return grouped

    def locate(self) -> str | None:
        """The op whose backward breaks the chain rule, checked over every parameter at once."""
        original = self.model.params.arrays()
        try:
            fault = locate_faulty_op(self.loss, original, eps=self.eps, seed=self.seed)
        finally:
            self.model.params.assign(original)
        if fault is None:
            return None
        logger.info("Gradient check traced the fault to op %s (node %d)", fault.op, fault.index)
        return fault.op

    def run(self) -> GradientCheckReport:
        original = self.model.params.arrays()
        per_group: dict[str, float] = {}
        worst_leaf, worst_err, checked = "", 0.0, 0
        try:
            for group, names in self.groups().items():
                result = check_gradients(
                    self.loss,
                    {name: original[name] for name in names},
                    eps=self.eps,
                    max_elements=self.max_elements,
                )
                self.model.params.assign({name: original[name] for name in names})
                per_group[group] = result.max_rel_err
                checked += result.checked_elements
                if result.worst_leaf is not None and (not worst_leaf or result.max_rel_err > worst_err):
                    worst_leaf, worst_err = result.worst_leaf, result.max_rel_err
                logger.debug("gradient check %s: %.3e", group, result.max_rel_err)
        finally:
            self.model.params.assign(original)

        passed = worst_err < self.tolerance
        worst_op = None if passed else self.locate()
        report = GradientCheckReport(
            passed=passed,
            tolerance=self.tolerance,
            max_rel_err=worst_err,
            worst_parameter=worst_leaf,
            worst_op=worst_op,
            checked_elements=checked,
            groups=per_group,
        )
        logger.info("Gradient check over %d groups: max relative error %.3e", len(per_group), worst_err)
        return report
