import logging
from dataclasses import dataclass, field

import numpy as np

from cchmm.core.errors import NumericalError, TrainingDivergedError, ValidationError
from cchmm.diffcore import ComputationTape, backward
from cchmm.models.data import DatasetBundle, WindowBatch
from cchmm.models.graph import RegionGraph
from cchmm.models.network import CCHMM
from cchmm.models.objective import total_loss
from cchmm.schemas.reports import EpochRecord, LossReport
from cchmm.schemas.training import TrainConfig
from cchmm.services.dataset import denormalize, iter_batches, normalize, window
from cchmm.services.evaluation import forecast, metric_report
from cchmm.services.optim import Adam
from cchmm.services.variants import apply_variant

logger = logging.getLogger(__name__)

LOSS_FIELDS = tuple(LossReport.model_fields)


@dataclass
class TrainingResult:
    model: CCHMM
    log: list[EpochRecord] = field(default_factory=list)
    # Ã after every epoch, the initial graph first
    snapshots: list[np.ndarray] = field(default_factory=list)
    best_epoch: int = 0
    best_val_mae: float | None = None


def _average(reports: list[tuple[LossReport, int]]) -> dict[str, float]:
    weight = sum(size for _, size in reports)
    return {name: sum(getattr(r, name) * size for r, size in reports) / weight for name in LOSS_FIELDS}


class TrainingService:
    def __init__(self, bundle: DatasetBundle, config: TrainConfig):
        self.config = config
        self.bundle = normalize(bundle)
        self.g_hat = RegionGraph(bundle.adjacency).g_hat
        self.train_windows = window(self.bundle, config.history, "train")
        self.val_windows = window(self.bundle, config.history, "val")
        if not self.train_windows:
            raise ValidationError("dataset has no training windows")
        self.model = CCHMM(apply_variant(config, self.bundle.condition_dim, self.bundle.n_regions), seed=config.seed)
        self.optimizer = Adam(
            self.model.params,
            lr=config.lr,
            beta1=config.beta1,
            beta2=config.beta2,
            eps_adam=config.eps_adam,
            clip_norm=config.clip_norm,
        )
        self._shuffle_rng = np.random.default_rng([config.seed, 1])
        self._noise_rng = np.random.default_rng([config.seed, 2])

    def train_step(self, batch: WindowBatch, epoch: int, index: int) -> LossReport:
        try:
            with ComputationTape() as tape:
                outputs = self.model.rollout(batch, self.g_hat, mode="train", rng=self._noise_rng)
                total, report = total_loss(outputs, batch, self.config.acyclicity_weight)
            self.model.params.zero_grad()
            backward(tape, total)
            norm = self.optimizer.step()
        except NumericalError as exc:
            raise TrainingDivergedError(epoch, index, str(exc)) from exc
        logger.debug("epoch %d batch %d total %.6f grad norm %.4f", epoch, index, report.total, norm)
        return report

    def validate(self, epoch: int) -> EpochRecord:
        reports = []
        for batch in iter_batches(self.val_windows, self.config.batch_size):
            outputs = self.model.rollout(batch, self.g_hat, mode="eval")
            _, report = total_loss(outputs, batch, self.config.acyclicity_weight)
            reports.append((report, batch.size))

        predicted = denormalize(forecast(self.model, self.val_windows, self.g_hat), self.bundle.stats)
        truth = denormalize(
            {m: np.stack([w.next_observations[m] for w in self.val_windows]) for m in predicted},
            self.bundle.stats,
        )
        scores = metric_report(predicted, truth, self.config.mape_threshold)
        return EpochRecord(
            epoch=epoch,
            split="val",
            **_average(reports),
            mae=scores.mean_mae,
            rmse=scores.mean_rmse,
            mape=scores.mean_mape,
        )

    def fit(self) -> TrainingResult:
        """Train for the configured epochs, keeping the parameters with the best validation MAE."""
        result = TrainingResult(model=self.model, snapshots=[self.model.causal_adjacency().numpy()])
        best_params = self.model.params.arrays()

        for epoch in range(1, self.config.epochs + 1):
            reports = []
            batches = iter_batches(self.train_windows, self.config.batch_size, self._shuffle_rng)
            for index, batch in enumerate(batches):
                reports.append((self.train_step(batch, epoch, index), batch.size))
            train_record = EpochRecord(epoch=epoch, split="train", **_average(reports))

            try:
                val_record = self.validate(epoch)
            except NumericalError as exc:
                raise TrainingDivergedError(epoch, -1, f"validation: {exc}") from exc
            result.log.extend([train_record, val_record])
            result.snapshots.append(self.model.causal_adjacency().numpy())

            if result.best_val_mae is None or val_record.mae < result.best_val_mae:
                result.best_val_mae, result.best_epoch = val_record.mae, epoch
                best_params = self.model.params.arrays()
            logger.info(
                "epoch %d: train total %.4f (recon %.4f, kl %.4f/%.4f, pred %.4f, h %.2e), val MAE %.4f",
                epoch,
                train_record.total,
                train_record.recon_nll,
                train_record.kl_eps,
                train_record.kl_z,
                train_record.pred_l2,
                train_record.acyclicity,
                val_record.mae,
            )

        self.model.params.assign(best_params)
        return result


def fit(bundle: DatasetBundle, config: TrainConfig) -> TrainingResult:
    return TrainingService(bundle, config).fit()
