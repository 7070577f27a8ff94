from pathlib import Path

import numpy as np

from cchmm.core.errors import DataFormatError, ValidationError
from cchmm.models.concepts import CONCEPTS, MODALITIES, MODALITY_CHANNELS
from cchmm.models.data import SPLIT_NAMES, DatasetBundle, check_splits
from cchmm.repositories.arrays import ArrayStore, dump_json, load_json, read_raw, write_raw

DATA_ARRAYS = ("C", *MODALITIES, "G")


class BundleRepository:
    """Dataset directory: the array container, splits.json and optional ground truth."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.store = ArrayStore(self.root)

    def save(self, bundle: DatasetBundle) -> None:
        if bundle.normalized:
            raise ValidationError("only raw bundles are saved; normalization is recomputed on load")
        self.root.mkdir(parents=True, exist_ok=True)
        arrays = {"C": bundle.conditions, **{m: bundle.observations[m] for m in MODALITIES}, "G": bundle.adjacency}
        self.store.write(arrays, attrs={"steps_per_day": int(bundle.steps_per_day)})
        dump_json(self.root / "splits.json", {name: list(bundle.splits[name]) for name in bundle.splits})
        if bundle.ground_truth_a is not None:
            a = bundle.ground_truth_a
            edges = [[int(i), int(j)] for i, j in zip(*np.nonzero(a))]
            dump_json(
                self.root / "ground_truth.json",
                {"concepts": list(CONCEPTS), "shape": list(a.shape), "edges": edges, "file": "ground_truth_A.bin"},
            )
            write_raw(self.root / "ground_truth_A.bin", a)

    def load(self) -> DatasetBundle:
        arrays, attrs = self.store.read()
        if sorted(arrays) != sorted(DATA_ARRAYS):
            raise DataFormatError(
                f"dataset arrays {sorted(arrays)} differ from {sorted(DATA_ARRAYS)}", file=str(self.store.meta_path)
            )
        conditions, g = arrays["C"], arrays["G"]
        if conditions.ndim != 3:
            raise DataFormatError(f"C must be T×N×c, got shape {conditions.shape}", array="C")
        steps, n = conditions.shape[:2]
        for m in MODALITIES:
            if arrays[m].shape != (steps, n, MODALITY_CHANNELS[m]):
                expected = (steps, n, MODALITY_CHANNELS[m])
                raise DataFormatError(f"{m} has shape {arrays[m].shape}, expected {expected}", array=m)
        if g.shape != (n, n):
            raise DataFormatError(f"G has shape {g.shape}, expected {(n, n)}", array="G")

        raw_splits = load_json(self.root / "splits.json")
        try:
            splits = {name: (int(raw_splits[name][0]), int(raw_splits[name][1])) for name in raw_splits}
            check_splits(splits, steps)
        except (TypeError, IndexError, ValueError, ValidationError) as exc:
            raise DataFormatError(f"splits.json is invalid: {exc}", file="splits.json") from exc
        if set(splits) != set(SPLIT_NAMES):
            raise DataFormatError(f"splits.json must define {list(SPLIT_NAMES)}", file="splits.json")

        ground_truth = None
        if (self.root / "ground_truth.json").is_file():
            ground_truth = read_raw(self.root / "ground_truth_A.bin", self._ground_truth_shape(), "ground_truth_A")

        return DatasetBundle(
            conditions=conditions,
            observations={m: arrays[m] for m in MODALITIES},
            adjacency=g,
            splits=splits,
            steps_per_day=int(attrs.get("steps_per_day", 48)),
            ground_truth_a=ground_truth,
        )

    def _ground_truth_shape(self) -> tuple[int, int]:
        header = load_json(self.root / "ground_truth.json")
        try:
            shape = tuple(int(size) for size in header["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"ground_truth.json has no valid shape: {exc!r}", file="ground_truth.json") from exc
        expected = (len(CONCEPTS), len(CONCEPTS))
        if shape != expected:
            raise DataFormatError(
                f"ground_truth.json declares shape {list(shape)}, expected {list(expected)}", file="ground_truth.json"
            )
        return shape
