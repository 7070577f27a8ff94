import logging
from collections.abc import Generator
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from cchmm.core.config import get_settings
from cchmm.models.data import DatasetBundle
from cchmm.models.network import CCHMM, ModelSpec
from cchmm.repositories.bundle import BundleRepository
from cchmm.schemas.scenario import ScenarioConfig
from cchmm.schemas.training import TrainConfig
from cchmm.services.gradcheck import SIZES, check_batch
from cchmm.services.synthetic import synth_generate


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch) -> Generator[None, None, None]:
    monkeypatch.delenv("CCHMM_SEED", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def tiny_scenario() -> ScenarioConfig:
    return ScenarioConfig(n_regions=4, grid_rows=2, grid_cols=2, timesteps=120, steps_per_day=8, seed=3)


@pytest.fixture
def tiny_bundle(tiny_scenario: ScenarioConfig) -> DatasetBundle:
    return synth_generate(tiny_scenario)


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(epochs=2, batch_size=8, latent_dim=3, history=2, seed=5)


@pytest.fixture
def tiny_model() -> CCHMM:
    return CCHMM(ModelSpec(condition_dim=3, n_regions=3, latent_dim=4), seed=0)


@pytest.fixture
def batch_and_graph():
    return check_batch(SIZES["small"], np.random.default_rng(11))


@pytest.fixture
def dataset_dir(tmp_path: Path, tiny_bundle: DatasetBundle) -> Path:
    root = tmp_path / "data"
    BundleRepository(root).save(tiny_bundle)
    return root


@pytest.fixture
def runner() -> Generator[CliRunner, None, None]:
    yield CliRunner()
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, "_cchmm", False)]:
        root.removeHandler(handler)
