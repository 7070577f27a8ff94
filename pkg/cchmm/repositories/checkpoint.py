from pathlib import Path

from cchmm.core.errors import DataFormatError
from cchmm.models.network import CCHMM, ModelSpec
from cchmm.repositories.arrays import ArrayStore, dump_json, load_json
from cchmm.schemas.training import TrainConfig

MANIFEST_FORMAT = "cchmm-checkpoint/1"


class CheckpointRepository:
    """manifest.json (model structure, training config, parameter order) next to an array container."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.store = ArrayStore(self.root)

    def save(self, model: CCHMM, config: TrainConfig, extra: dict | None = None) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.store.write(model.params.arrays())
        dump_json(
            self.root / "manifest.json",
            {
                "format": MANIFEST_FORMAT,
                "model": model.spec.to_dict(),
                "train": config.model_dump(mode="json"),
                "parameters": model.params.names(),
                "parameter_count": model.params.count(),
                **(extra or {}),
            },
        )

    def load(self) -> tuple[CCHMM, TrainConfig]:
        manifest = load_json(self.root / "manifest.json")
        if manifest.get("format") != MANIFEST_FORMAT:
            raise DataFormatError("manifest.json is not a checkpoint manifest", file="manifest.json")
        try:
            spec = ModelSpec.from_dict(manifest["model"])
            config = TrainConfig.model_validate(manifest["train"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"manifest.json is invalid: {exc}", file="manifest.json") from exc
        arrays, _ = self.store.read()
        model = CCHMM(spec)
        if model.params.names() != manifest.get("parameters"):
            raise DataFormatError("parameter list in manifest.json does not match the model", file="manifest.json")
        model.params.load(arrays)
        return model, config
