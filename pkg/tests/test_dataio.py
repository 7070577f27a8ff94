import json
import logging
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from cchmm.core.errors import DataFormatError, ValidationError
from cchmm.models.concepts import MODALITIES
from cchmm.models.data import DatasetBundle, check_splits, split_bounds
from cchmm.models.network import CCHMM, ModelSpec
from cchmm.models.objective import acyclicity
from cchmm.repositories.bundle import BundleRepository
from cchmm.repositories.checkpoint import CheckpointRepository
from cchmm.schemas.scenario import ScenarioConfig
from cchmm.schemas.training import TrainConfig
from cchmm.services.dataset import compute_stats, denormalize, iter_batches, normalize, window
from cchmm.services.synthetic import grid_adjacency, synth_generate


def _files(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _toy_bundle(steps: int, splits: dict[str, tuple[int, int]]) -> DatasetBundle:
    rng = np.random.default_rng(0)
    return DatasetBundle(
        conditions=rng.standard_normal((steps, 2, 3)),
        observations={m: rng.random((steps, 2, 1 if m == "v" else 2)) for m in MODALITIES},
        adjacency=np.array([[0.0, 1.0], [1.0, 0.0]]),
        splits=splits,
    )


# generator


def test_generation_is_deterministic(tiny_scenario):
    first, second = synth_generate(tiny_scenario), synth_generate(tiny_scenario)

    assert np.array_equal(first.conditions, second.conditions)
    for m in MODALITIES:
        assert np.array_equal(first.observations[m], second.observations[m])
    assert np.array_equal(first.adjacency, second.adjacency)


def test_generated_shapes(tiny_bundle, tiny_scenario):
    assert tiny_bundle.conditions.shape == (120, 4, tiny_scenario.condition_dim)
    assert tiny_bundle.observations["bike"].shape == (120, 4, 2)
    assert tiny_bundle.observations["v"].shape == (120, 4, 1)
    assert tiny_bundle.steps_per_day == 8


def test_noise_free_emission_is_deterministic_given_latents(tiny_scenario):
    quiet = synth_generate(tiny_scenario.model_copy(update={"emission_noise_std": 0.0}))
    noisy = synth_generate(tiny_scenario)

    assert np.array_equal(quiet.conditions, noisy.conditions)
    # softplus emissions stay strictly positive without noise, so nothing was clipped
    assert np.all(quiet.observations["bike"] > 0.0)
    assert not np.array_equal(quiet.observations["bike"], noisy.observations["bike"])


def test_rain_suppresses_bike_flows(tiny_scenario):
    config = tiny_scenario.model_copy(update={"timesteps": 2000, "weather_bike_weight": -3.0})
    bundle = synth_generate(config)

    precipitation = bundle.conditions[:, 0, -1]
    bike_inflow = bundle.observations["bike"][:, :, 0].mean(axis=1)
    assert precipitation.max() > 0.0
    assert np.corrcoef(precipitation, bike_inflow)[0, 1] < 0.0


def test_generated_values_are_physical_across_seeds(tiny_scenario):
    for seed in range(20):
        bundle = synth_generate(tiny_scenario.model_copy(update={"seed": seed, "timesteps": 200}))
        for m in ("bike", "taxi", "bus"):
            assert np.all(bundle.observations[m] >= 0.0)
        assert np.all(bundle.observations["v"] > 0.0)
        assert all(np.all(np.isfinite(bundle.observations[m])) for m in MODALITIES)
        assert np.all(np.isfinite(bundle.conditions))


def test_ground_truth_graph_is_a_dag(tiny_bundle):
    a = tiny_bundle.ground_truth_a

    assert np.array_equal(np.tril(a), np.zeros_like(a))
    assert acyclicity(a).item() == 0.0


def test_grid_adjacency_is_symmetric_without_self_loops():
    g = grid_adjacency(ScenarioConfig())

    assert g.shape == (20, 20)
    assert np.array_equal(g, g.T)
    assert np.all(np.diag(g) == 0.0)
    assert g[0, 1] == pytest.approx(np.exp(-1.0))
    assert g[0, 19] == 0.0


def test_scenario_rejects_inconsistent_grid():
    with pytest.raises(PydanticValidationError):
        ScenarioConfig(n_regions=6, grid_rows=2, grid_cols=2)


def test_scenario_rejects_cyclic_ground_truth():
    weights = [[0.0] * 5 for _ in range(5)]
    weights[3][1] = 0.5

    with pytest.raises(PydanticValidationError):
        ScenarioConfig(causal_weights=weights)


# splits and windows


def test_split_bounds_partition_the_series():
    for steps in (5, 120, 2000, 2001):
        splits = split_bounds(steps)
        check_splits(splits, steps)
        assert splits["train"][0] == 0
        assert splits["test"][1] == steps


def test_check_splits_rejects_gaps():
    with pytest.raises(ValidationError):
        check_splits({"train": (0, 5), "val": (6, 8), "test": (8, 10)}, 10)
    with pytest.raises(ValidationError):
        check_splits({"train": (0, 5), "val": (5, 8), "test": (8, 9)}, 10)


def test_window_count():
    windows = window(_toy_bundle(8, {"train": (0, 8)}), history=6)

    assert len(windows) == 2
    assert [w.target_index for w in windows] == [6, 7]


def test_single_step_history():
    windows = window(_toy_bundle(8, {"train": (0, 8)}), history=1)

    assert len(windows) == 7
    assert windows[0].conditions.shape == (1, 2, 3)
    assert np.array_equal(windows[0].next_observations["v"], windows[1].observations["v"][0])


def test_windows_stay_inside_their_split(tiny_bundle):
    for w in window(tiny_bundle, history=6):
        start, stop = tiny_bundle.splits[w.split]
        assert start <= w.start and w.target_index < stop


def test_history_must_fit_split():
    with pytest.raises(ValidationError):
        window(_toy_bundle(8, {"train": (0, 8)}), history=8)


def test_batches_cover_windows_once(tiny_bundle):
    windows = window(tiny_bundle, history=2, split="train")
    batches = list(iter_batches(windows, 8, np.random.default_rng(0)))

    targets = np.concatenate([b.target_indices for b in batches])
    assert sorted(targets.tolist()) == [w.target_index for w in windows]
    assert batches[0].conditions.shape == (8, 2, 4, 15)


# normalization


def test_normalization_round_trip(tiny_bundle):
    scaled = normalize(tiny_bundle)
    restored = denormalize(scaled.observations, scaled.stats)

    for m in MODALITIES:
        assert np.max(np.abs(restored[m] - tiny_bundle.observations[m])) < 1e-12
    assert normalize(scaled) is scaled


def test_training_split_is_centered(tiny_bundle):
    scaled = normalize(tiny_bundle)
    start, stop = scaled.splits["train"]

    for m in MODALITIES:
        assert np.all(np.abs(scaled.observations[m][start:stop].mean(axis=(0, 1))) < 1e-10)


def test_constant_channel_normalizes_to_zero(caplog):
    bundle = _toy_bundle(10, split_bounds(10))
    bundle.observations["v"][:] = 42.0

    with caplog.at_level(logging.WARNING):
        scaled = normalize(bundle)
    assert np.array_equal(scaled.observations["v"], np.zeros((10, 2, 1)))
    assert compute_stats(bundle).std["v"].tolist() == [1e-8]
    assert "Constant channel" in caplog.text


# containers


def test_bundle_round_trip_is_byte_identical(tmp_path, tiny_bundle):
    BundleRepository(tmp_path / "a").save(tiny_bundle)
    loaded = BundleRepository(tmp_path / "a").load()
    BundleRepository(tmp_path / "b").save(loaded)

    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    assert np.array_equal(loaded.ground_truth_a, tiny_bundle.ground_truth_a)
    assert loaded.splits == tiny_bundle.splits


def test_dataset_layout(dataset_dir):
    meta = json.loads((dataset_dir / "meta.json").read_text())

    assert sorted(meta["arrays"]) == sorted(["C", "bike", "taxi", "bus", "v", "G"])
    assert meta["arrays"]["bike"] == {
        "dtype": "f64",
        "shape": [120, 4, 2],
        "file": "arrays/bike.bin",
        "byte_order": "little",
    }
    assert (dataset_dir / "splits.json").is_file()
    assert (dataset_dir / "ground_truth.json").is_file()


def test_truncated_array_names_the_array(dataset_dir):
    path = dataset_dir / "arrays" / "taxi.bin"
    path.write_bytes(path.read_bytes()[:-8])

    with pytest.raises(DataFormatError) as excinfo:
        BundleRepository(dataset_dir).load()
    assert excinfo.value.array == "taxi"
    assert "taxi" in str(excinfo.value)


@pytest.mark.parametrize(
    "header",
    [
        {"concepts": ["poi"]},
        {"shape": "5x5"},
        {"shape": [5, None]},
        {"shape": [4, 4]},
        [5, 5],
    ],
)
def test_malformed_ground_truth_header_is_a_format_error(dataset_dir, header):
    (dataset_dir / "ground_truth.json").write_text(json.dumps(header))

    with pytest.raises(DataFormatError) as excinfo:
        BundleRepository(dataset_dir).load()
    assert excinfo.value.file == "ground_truth.json"


def test_meta_shape_must_match_bytes(dataset_dir):
    meta_path = dataset_dir / "meta.json"
    meta = json.loads(meta_path.read_text())
    meta["arrays"]["v"]["shape"] = [121, 4, 1]
    meta_path.write_text(json.dumps(meta))

    with pytest.raises(DataFormatError) as excinfo:
        BundleRepository(dataset_dir).load()
    assert excinfo.value.array == "v"


def test_missing_meta_names_the_file(tmp_path):
    with pytest.raises(DataFormatError) as excinfo:
        BundleRepository(tmp_path).load()
    assert "meta.json" in str(excinfo.value)


def test_checkpoint_round_trip(tmp_path):
    model = CCHMM(ModelSpec(condition_dim=3, n_regions=3, latent_dim=4, use_gru=False, variant="no-gru"), seed=4)
    config = TrainConfig(no_gru=True, latent_dim=4)
    CheckpointRepository(tmp_path / "a").save(model, config)

    loaded, loaded_config = CheckpointRepository(tmp_path / "a").load()
    CheckpointRepository(tmp_path / "b").save(loaded, loaded_config)
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    assert loaded.spec == model.spec
    assert loaded_config == config


def test_checkpoint_rejects_foreign_parameters(tmp_path):
    model = CCHMM(ModelSpec(condition_dim=3, n_regions=3, latent_dim=4), seed=4)
    CheckpointRepository(tmp_path).save(model, TrainConfig(latent_dim=4))
    manifest_path = tmp_path / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["model"]["latent_dim"] = 5
    manifest_path.write_text(json.dumps(manifest))

    with pytest.raises(DataFormatError):
        CheckpointRepository(tmp_path).load()
