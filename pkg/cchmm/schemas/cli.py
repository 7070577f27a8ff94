from pydantic import Field

from cchmm.schemas.common import BaseSchema
from cchmm.schemas.scenario import ScenarioConfig
from cchmm.schemas.training import TrainConfig


class PathsConfig(BaseSchema):
    data: str | None = None
    out: str | None = None
    checkpoint: str | None = None


class CliConfig(BaseSchema):
    """Everything a command reads from a JSON config file; one section per concern."""

    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
