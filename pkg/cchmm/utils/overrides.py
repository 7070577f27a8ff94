"""Assemble the effective CliConfig from a JSON file, the environment and command-line overrides."""

import json
from pathlib import Path
from typing import Any, Iterable, Mapping

from pydantic import ValidationError as PydanticValidationError

from cchmm.core.config import get_settings
from cchmm.core.errors import ConfigError
from cchmm.schemas.cli import CliConfig


def parse_assignment(text: str) -> tuple[str, Any]:
    """``section.key=value``; the value is read as JSON when it parses, else kept as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form section.key=value", key=text)
    key, raw = text.split("=", 1)
    key = key.strip()
    if key.count(".") != 1:
        raise ConfigError(f"override key {key!r} must be section.key", key=key)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _assign(payload: dict, key: str, value: Any) -> None:
    section, field = key.split(".")
    target = payload.setdefault(section, {})
    if not isinstance(target, dict):
        raise ConfigError(f"config section {section!r} is not an object", key=section)
    target[field] = value


def load_config(
    path: Path | str | None = None,
    flags: Mapping[str, Any] | None = None,
    assignments: Iterable[str] = (),
) -> CliConfig:
    """File < CCHMM_SEED < explicit flags < ``--set`` assignments; unknown keys are rejected."""
    payload: dict = {}
    if path is not None:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} does not exist") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")

    seed = get_settings().seed
    if seed is not None:
        _assign(payload, "scenario.seed", seed)
        _assign(payload, "train.seed", seed)
    for key, value in (flags or {}).items():
        if value is not None:
            _assign(payload, key, value)
    for text in assignments:
        _assign(payload, *parse_assignment(text))

    try:
        return CliConfig.model_validate(payload)
    except PydanticValidationError as exc:
        error = exc.errors()[0]
        key = ".".join(str(part) for part in error["loc"])
        if error["type"] == "extra_forbidden":
            raise ConfigError(f"unknown config key {key}", key=key) from exc
        raise ConfigError(f"invalid value for {key}: {error['msg']}", key=key) from exc
