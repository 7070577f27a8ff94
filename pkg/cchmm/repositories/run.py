import csv
import json
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel

import cchmm
from cchmm.repositories.arrays import dump_json


class RunRepository:
    """Everything one command writes; timestamps only ever go to run_info.json."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.root / name

    def write_model(self, name: str, model: BaseModel) -> None:
        self.path(name).write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")

    def write_json(self, name: str, payload) -> None:
        dump_json(self.path(name), payload)

    def write_jsonl(self, name: str, records: Iterable[BaseModel | dict]) -> None:
        with self.path(name).open("w", encoding="utf-8") as handle:
            for record in records:
                line = record.model_dump_json() if isinstance(record, BaseModel) else json.dumps(record, sort_keys=True)
                handle.write(line + "\n")

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
        with self.path(name).open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)

    def write_graph(self, name: str, matrix: np.ndarray, labels: Sequence[str]) -> None:
        self.write_json(name, graph_payload(matrix, labels))

    def write_run_info(self, command: str, **details) -> None:
        self.write_json(
            "run_info.json",
            {
                "command": command,
                "finished_at": datetime.now(timezone.utc).isoformat(),
                "version": cchmm.__version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                **details,
            },
        )


def graph_payload(matrix: np.ndarray, labels: Sequence[str]) -> dict:
    return {"labels": list(labels), "matrix": np.asarray(matrix, dtype=float).tolist()}


def graph_rows(matrix: np.ndarray, labels: Sequence[str]) -> list[list]:
    """CSV body for a labelled square matrix; the header row is ``["", *labels]``."""
    return [[label, *(repr(float(v)) for v in row)] for label, row in zip(labels, np.asarray(matrix))]


def read_graph_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    labels = rows[0][1:]
    return labels, np.array([[float(v) for v in row[1:]] for row in rows[1:]])
