import logging
from typing import Iterator, Mapping

import numpy as np

from cchmm.core.errors import ValidationError
from cchmm.models.concepts import MODALITIES
from cchmm.models.data import SPLIT_NAMES, DatasetBundle, NormalizationStats, Window, WindowBatch, collate

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8


def compute_stats(bundle: DatasetBundle) -> NormalizationStats:
    start, stop = bundle.splits["train"]
    if stop <= start:
        raise ValidationError("training split is empty")
    mean, std = {}, {}
    for modality in MODALITIES:
        values = bundle.observations[modality][start:stop]
        channel_mean = values.mean(axis=(0, 1))
        channel_std = values.std(axis=(0, 1))
        flat = channel_std < STD_FLOOR
        if np.any(flat):
            logger.warning(
                "Constant channel(s) %s in %s; std floored at %g", np.flatnonzero(flat).tolist(), modality, STD_FLOOR
            )
            channel_std = np.where(flat, STD_FLOOR, channel_std)
        mean[modality], std[modality] = channel_mean, channel_std
    return NormalizationStats(mean=mean, std=std)


def normalize(bundle: DatasetBundle) -> DatasetBundle:
    if bundle.normalized:
        return bundle
    stats = compute_stats(bundle)
    observations = {m: (bundle.observations[m] - stats.mean[m]) / stats.std[m] for m in MODALITIES}
    return bundle.with_(observations=observations, stats=stats, normalized=True)


def denormalize(values: Mapping[str, np.ndarray], stats: NormalizationStats) -> dict[str, np.ndarray]:
    return {m: np.asarray(v) * stats.std[m] + stats.mean[m] for m, v in values.items()}


def window(bundle: DatasetBundle, history: int, split: str | None = None) -> list[Window]:
    """Stride-1 windows of ``history`` steps plus a target, never crossing a split boundary."""
    if history < 1:
        raise ValidationError("history must be at least 1")
    names = [split] if split is not None else [name for name in SPLIT_NAMES if name in bundle.splits]
    windows: list[Window] = []
    for name in names:
        if name not in bundle.splits:
            raise ValidationError(f"bundle has no {name!r} split")
        start, stop = bundle.splits[name]
        if history >= stop - start:
            raise ValidationError(f"history {history} does not fit the {name} split of length {stop - start}")
        for first in range(start, stop - history):
            target = first + history
            windows.append(
                Window(
                    split=name,
                    start=first,
                    conditions=bundle.conditions[first:target],
                    observations={m: bundle.observations[m][first:target] for m in MODALITIES},
                    next_conditions=bundle.conditions[target],
                    next_observations={m: bundle.observations[m][target] for m in MODALITIES},
                )
            )
    return windows


def iter_batches(
    windows: list[Window],
    batch_size: int,
    rng: np.random.Generator | None = None,
) -> Iterator[WindowBatch]:
    """Collate windows into batches, in a seeded shuffled order when ``rng`` is given."""
    if not windows:
        raise ValidationError("no windows to batch")
    order = rng.permutation(len(windows)) if rng is not None else np.arange(len(windows))
    for offset in range(0, len(order), batch_size):
        yield collate([windows[i] for i in order[offset:offset + batch_size]])
