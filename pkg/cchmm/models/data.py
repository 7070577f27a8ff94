from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from cchmm.core.errors import ValidationError
from cchmm.models.concepts import MODALITIES

SPLIT_NAMES: tuple[str, ...] = ("train", "val", "test")


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel z-score statistics of each modality over the training split."""

    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]


@dataclass(frozen=True)
class DatasetBundle:
    """Conditions, per-modality observations and the region graph of one scenario.

    Arrays are time-major: ``conditions`` is T×N×c_c and ``observations[m]``
    is T×N×c_m. ``splits`` maps split names to half-open [start, stop) ranges.
    """

    conditions: np.ndarray
    observations: dict[str, np.ndarray]
    adjacency: np.ndarray
    splits: dict[str, tuple[int, int]]
    steps_per_day: int = 48
    ground_truth_a: np.ndarray | None = None
    stats: NormalizationStats | None = None
    normalized: bool = False
    attrs: dict = field(default_factory=dict)

    @property
    def timesteps(self) -> int:
        return self.conditions.shape[0]

    @property
    def n_regions(self) -> int:
        return self.conditions.shape[1]

    @property
    def condition_dim(self) -> int:
        return self.conditions.shape[2]

    def with_(self, **changes) -> "DatasetBundle":
        return replace(self, **changes)


@dataclass(frozen=True)
class Window:
    """T_h history steps plus the one-step-ahead target, all inside one split."""

    split: str
    start: int
    conditions: np.ndarray
    observations: dict[str, np.ndarray]
    next_conditions: np.ndarray
    next_observations: dict[str, np.ndarray]

    @property
    def history(self) -> int:
        return self.conditions.shape[0]

    @property
    def target_index(self) -> int:
        return self.start + self.history


@dataclass(frozen=True)
class WindowBatch:
    """Windows stacked on a leading batch axis: conditions B×T_h×N×c_c, and so on."""

    conditions: np.ndarray
    observations: dict[str, np.ndarray]
    next_conditions: np.ndarray
    next_observations: dict[str, np.ndarray]
    target_indices: np.ndarray

    @property
    def size(self) -> int:
        return self.conditions.shape[0]

    @property
    def history(self) -> int:
        return self.conditions.shape[1]

    def step_conditions(self, t: int) -> np.ndarray:
        return self.conditions[:, t]

    def step_observations(self, t: int) -> dict[str, np.ndarray]:
        return {m: self.observations[m][:, t] for m in MODALITIES}


def collate(windows: list[Window]) -> WindowBatch:
    return WindowBatch(
        conditions=np.stack([w.conditions for w in windows]),
        observations={m: np.stack([w.observations[m] for w in windows]) for m in MODALITIES},
        next_conditions=np.stack([w.next_conditions for w in windows]),
        next_observations={m: np.stack([w.next_observations[m] for w in windows]) for m in MODALITIES},
        target_indices=np.array([w.target_index for w in windows], dtype=np.int64),
    )


def split_bounds(timesteps: int) -> dict[str, tuple[int, int]]:
    """Contiguous 60/20/20 train/val/test ranges covering [0, timesteps)."""
    train_end = int(round(0.6 * timesteps))
    val_end = int(round(0.8 * timesteps))
    return {"train": (0, train_end), "val": (train_end, val_end), "test": (val_end, timesteps)}


def check_splits(splits: Mapping[str, tuple[int, int]], timesteps: int) -> None:
    cursor = 0
    for name in SPLIT_NAMES:
        if name not in splits:
            continue
        start, stop = splits[name]
        if start != cursor or stop < start:
            raise ValidationError(f"split {name} [{start}, {stop}) does not continue at {cursor}")
        cursor = stop
    if cursor != timesteps or set(splits) - set(SPLIT_NAMES):
        raise ValidationError(f"splits {dict(splits)} do not partition [0, {timesteps})")
