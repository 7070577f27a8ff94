import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from cchmm.core.errors import ShapeMismatchError, ValidationError
from cchmm.models.concepts import MODALITIES
from cchmm.models.data import DatasetBundle, Window
from cchmm.models.graph import RegionGraph
from cchmm.models.network import CCHMM
from cchmm.models.objective import acyclicity
from cchmm.schemas.reports import EvaluationReport, GraphRecoveryReport, MetricReport, ModalityMetrics
from cchmm.services.dataset import denormalize, iter_batches, normalize, window

logger = logging.getLogger(__name__)

EDGE_THRESHOLD = 0.1
BASELINES = ("persistence", "historical_average")


def metrics(pred: np.ndarray, truth: np.ndarray, mask_threshold: float = 1.0) -> ModalityMetrics:
    """MAE, RMSE and MAPE (percent, over entries with |truth| >= mask_threshold)."""
    pred, truth = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ShapeMismatchError("metrics", [pred.shape, truth.shape])
    if pred.size == 0:
        raise ValidationError("metrics need at least one entry")
    error = pred - truth
    mask = np.abs(truth) >= mask_threshold
    mape = float(np.mean(np.abs(error[mask]) / np.abs(truth[mask])) * 100.0) if mask.any() else None
    return ModalityMetrics(
        mae=float(np.mean(np.abs(error))),
        rmse=float(np.sqrt(np.mean(error * error))),
        mape=mape,
    )


def metric_report(
    predictions: Mapping[str, np.ndarray],
    truths: Mapping[str, np.ndarray],
    mask_threshold: float = 1.0,
) -> MetricReport:
    per_modality = {m: metrics(predictions[m], truths[m], mask_threshold) for m in MODALITIES}
    mapes = [r.mape for r in per_modality.values() if r.mape is not None]
    return MetricReport(
        modalities=per_modality,
        mean_mae=float(np.mean([r.mae for r in per_modality.values()])),
        mean_rmse=float(np.mean([r.rmse for r in per_modality.values()])),
        mean_mape=float(np.mean(mapes)) if mapes else None,
    )


def baseline_persistence(observations: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """The last observed step of each window; works on one window (T_h×N×c) or a batch."""
    return {m: np.array(observations[m][..., -1, :, :]) for m in MODALITIES}


class HistoricalAverage:
    """Per time-of-day slot training means, per region and channel."""

    def __init__(self, bundle: DatasetBundle):
        start, stop = bundle.splits["train"]
        self.steps_per_day = bundle.steps_per_day
        slots = np.arange(start, stop) % self.steps_per_day
        missing = sorted(set(range(self.steps_per_day)) - set(slots.tolist()))
        if missing:
            raise ValidationError(f"training split does not cover time-of-day slot {missing[0]}")
        self.means = {
            m: np.stack(
                [bundle.observations[m][start:stop][slots == s].mean(axis=0) for s in range(self.steps_per_day)]
            )
            for m in MODALITIES
        }

    def predict(self, target_indices: np.ndarray) -> dict[str, np.ndarray]:
        slots = np.asarray(target_indices) % self.steps_per_day
        return {m: self.means[m][slots] for m in MODALITIES}


def baseline_historical_average(bundle: DatasetBundle, target_indices: np.ndarray) -> dict[str, np.ndarray]:
    return HistoricalAverage(bundle).predict(target_indices)


def graph_recovery(
    learned: np.ndarray,
    truth: np.ndarray,
    threshold: float = EDGE_THRESHOLD,
) -> GraphRecoveryReport:
    """Score |learned| against the non-zero pattern of ``truth``, diagonals excluded.

    SHD counts unordered concept pairs whose thresholded edge state differs,
    so a reversed edge costs one.
    """
    learned, truth = np.abs(np.asarray(learned, dtype=float)), np.asarray(truth, dtype=float)
    if learned.shape != truth.shape or learned.ndim != 2 or learned.shape[0] != learned.shape[1]:
        raise ShapeMismatchError("graph_recovery", [learned.shape, truth.shape])
    k = learned.shape[0]
    off = ~np.eye(k, dtype=bool)
    actual = (truth != 0) & off
    scores_pos, scores_neg = learned[actual], learned[off & ~actual]

    auc = None
    if scores_pos.size and scores_neg.size:
        wins = sum(float(p > q) + 0.5 * float(p == q) for p in scores_pos for q in scores_neg)
        auc = wins / (scores_pos.size * scores_neg.size)

    predicted = (learned > threshold) & off
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else None

    shd = 0
    for i in range(k):
        for j in range(i + 1, k):
            if (predicted[i, j], predicted[j, i]) != (actual[i, j], actual[j, i]):
                shd += 1
    return GraphRecoveryReport(
        auc=auc,
        f1=f1,
        precision=precision,
        recall=recall,
        structural_hamming=shd,
        threshold=threshold,
    )


def forecast(
    model: CCHMM,
    windows: list[Window],
    g_hat: np.ndarray,
    batch_size: int = 64,
) -> dict[str, np.ndarray]:
    """Eval-mode one-step-ahead forecasts for ``windows`` in order, in the windows' units."""
    parts: dict[str, list[np.ndarray]] = {m: [] for m in MODALITIES}
    for batch in iter_batches(windows, batch_size):
        outputs = model.rollout(batch, g_hat, mode="eval")
        for m in MODALITIES:
            parts[m].append(outputs.forecast[m].numpy())
    return {m: np.concatenate(parts[m]) for m in MODALITIES}


@dataclass
class Evaluation:
    report: EvaluationReport
    target_indices: np.ndarray
    truth: dict[str, np.ndarray]
    predictions: dict[str, np.ndarray]
    baselines: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def plot_rows(self, modality: str) -> list[tuple[int, float, float]]:
        """(step, truth, prediction) averaged over regions and channels."""
        predicted = self.predictions.get(modality)
        if predicted is None:
            predicted = self.baselines["persistence"][modality]
        truth = self.truth[modality].mean(axis=(1, 2))
        predicted = predicted.mean(axis=(1, 2))
        return [(int(t), float(a), float(b)) for t, a, b in zip(self.target_indices, truth, predicted)]


class EvaluationService:
    def __init__(self, bundle: DatasetBundle, history: int, mask_threshold: float = 1.0):
        if bundle.normalized:
            raise ValidationError("evaluate against the raw bundle; normalization is applied internally")
        self.bundle = bundle
        self.normalized = normalize(bundle)
        self.history = history
        self.mask_threshold = mask_threshold
        self.g_hat = RegionGraph(bundle.adjacency).g_hat

    def check_compatible(self, model: CCHMM) -> None:
        spec = model.spec
        if spec.condition_dim != self.bundle.condition_dim or spec.n_regions != self.bundle.n_regions:
            raise ShapeMismatchError(
                "evaluate",
                [(spec.n_regions, spec.condition_dim), (self.bundle.n_regions, self.bundle.condition_dim)],
                "checkpoint (regions, condition dim) differ from the dataset",
            )

    def model_predictions(self, model: CCHMM, split: str) -> dict[str, np.ndarray]:
        self.check_compatible(model)
        scaled = forecast(model, window(self.normalized, self.history, split), self.g_hat)
        return denormalize(scaled, self.normalized.stats)

    def evaluate(
        self,
        split: str = "test",
        model: CCHMM | None = None,
        baselines: tuple[str, ...] = BASELINES,
    ) -> Evaluation:
        raw_windows = window(self.bundle, self.history, split)
        targets = np.array([w.target_index for w in raw_windows])
        truth = {m: np.stack([w.next_observations[m] for w in raw_windows]) for m in MODALITIES}

        predicted: dict[str, dict[str, np.ndarray]] = {}
        for name in baselines:
            if name == "persistence":
                history = {m: np.stack([w.observations[m] for w in raw_windows]) for m in MODALITIES}
                predicted[name] = baseline_persistence(history)
            elif name == "historical_average":
                predicted[name] = baseline_historical_average(self.bundle, targets)
            else:
                raise ValidationError(f"unknown baseline {name!r}")

        report = EvaluationReport(
            split=split,
            windows=len(raw_windows),
            baselines={name: metric_report(p, truth, self.mask_threshold) for name, p in predicted.items()},
        )
        model_predictions: dict[str, np.ndarray] = {}
        if model is not None:
            model_predictions = self.model_predictions(model, split)
            a_tilde = model.causal_adjacency()
            report.variant = model.spec.variant
            report.model = metric_report(model_predictions, truth, self.mask_threshold)
            report.acyclicity = acyclicity(a_tilde).item()
            if self.bundle.ground_truth_a is not None and a_tilde.shape == self.bundle.ground_truth_a.shape:
                report.graph_recovery = graph_recovery(a_tilde.numpy(), self.bundle.ground_truth_a)
            logger.info("Evaluated %s on %s: mean MAE %.4f", model.spec.variant, split, report.model.mean_mae)
        return Evaluation(
            report=report,
            target_indices=targets,
            truth=truth,
            predictions=model_predictions,
            baselines=predicted,
        )
