"""Array container: meta.json plus one raw little-endian float64 file per array under arrays/."""

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from cchmm.core.errors import DataFormatError

FORMAT = "cchmm-arrays/1"
DTYPE = np.dtype("<f8")


def dump_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_json(path: Path) -> Any:
    if not path.is_file():
        raise DataFormatError(f"missing file {path.name}", file=str(path))
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path.name} is not valid JSON: {exc}", file=str(path)) from exc


def write_raw(path: Path, array: np.ndarray) -> None:
    path.write_bytes(np.ascontiguousarray(array, dtype=DTYPE).tobytes())


def read_raw(path: Path, shape: tuple[int, ...], name: str) -> np.ndarray:
    if not path.is_file():
        raise DataFormatError(f"missing array file for {name!r}", file=str(path), array=name)
    payload = path.read_bytes()
    expected = int(np.prod(shape, dtype=np.int64)) * DTYPE.itemsize
    if len(payload) != expected:
        raise DataFormatError(
            f"array {name!r} holds {len(payload)} bytes, shape {list(shape)} needs {expected}",
            file=str(path),
            array=name,
        )
    return np.frombuffer(payload, dtype=DTYPE).reshape(shape).astype(np.float64)


class ArrayStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)

    @property
    def meta_path(self) -> Path:
        return self.root / "meta.json"

    def write(self, arrays: Mapping[str, np.ndarray], attrs: Mapping[str, Any] | None = None) -> None:
        (self.root / "arrays").mkdir(parents=True, exist_ok=True)
        entries = {}
        for name, array in arrays.items():
            file = f"arrays/{name}.bin"
            write_raw(self.root / file, array)
            entries[name] = {"dtype": "f64", "shape": list(np.shape(array)), "file": file, "byte_order": "little"}
        dump_json(self.meta_path, {"format": FORMAT, "arrays": entries, "attrs": dict(attrs or {})})

    def read(self) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
        meta = load_json(self.meta_path)
        if not isinstance(meta, dict) or meta.get("format") != FORMAT or not isinstance(meta.get("arrays"), dict):
            raise DataFormatError("meta.json is not an array container header", file=str(self.meta_path))
        arrays = {}
        for name, entry in meta["arrays"].items():
            try:
                dtype, shape, file, order = entry["dtype"], entry["shape"], entry["file"], entry["byte_order"]
            except (KeyError, TypeError) as exc:
                raise DataFormatError(f"meta.json entry for {name!r} is incomplete", array=name) from exc
            if dtype != "f64" or order != "little":
                raise DataFormatError(f"array {name!r} must be little-endian f64, got {dtype}/{order}", array=name)
            if not all(isinstance(d, int) and d >= 0 for d in shape):
                raise DataFormatError(f"array {name!r} has an invalid shape {shape}", array=name)
            arrays[name] = read_raw(self.root / file, tuple(shape), name)
        return arrays, dict(meta.get("attrs", {}))
