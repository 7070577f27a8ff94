import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from cchmm.core.errors import NonFiniteError, TrainingDivergedError, ValidationError
from cchmm.models.network import CCHMM
from cchmm.models.params import ParameterStore
from cchmm.repositories.checkpoint import CheckpointRepository
from cchmm.schemas.training import TrainConfig, Variant
from cchmm.services import training
from cchmm.services.optim import Adam, AdamState, adam_step, clip_grad_norm
from cchmm.services.training import TrainingService, fit
from cchmm.services.variants import apply_variant


def test_adam_zero_gradient_leaves_parameters():
    params = {"w": np.array([1.0, -2.0]), "b": np.array(0.5)}
    grads = {"w": np.zeros(2), "b": np.array(0.0)}

    updated, state = adam_step(params, grads, AdamState())
    assert np.array_equal(updated["w"], params["w"])
    assert updated["b"] == params["b"]
    assert state.t == 1


def test_adam_first_step_moves_by_learning_rate():
    updated, state = adam_step({"x": np.array(1.0)}, {"x": np.array(0.3)}, AdamState(lr=0.001))

    assert updated["x"] - 1.0 == pytest.approx(-0.001 * 0.3 / (0.3 + 1e-8), rel=1e-9)
    assert state.m["x"] == pytest.approx(0.03)


def test_adam_is_deterministic():
    rng = np.random.default_rng(0)
    params = {"w": rng.standard_normal((3, 2))}
    grads = [{"w": rng.standard_normal((3, 2))} for _ in range(5)]

    def run():
        current, state = params, AdamState(lr=0.01)
        for g in grads:
            current, state = adam_step(current, g, state)
        return current["w"]

    assert np.array_equal(run(), run())


def test_adam_rejects_non_finite_gradient():
    with pytest.raises(NonFiniteError) as excinfo:
        adam_step({"gen.W": np.zeros(2)}, {"gen.W": np.array([1.0, np.nan])}, AdamState())
    assert "gen.W" in str(excinfo.value)


def test_clip_preserves_direction():
    clipped, norm = clip_grad_norm({"a": np.array([3.0, 0.0]), "b": np.array([0.0, 4.0])}, 1.0)

    assert norm == 5.0
    assert clipped["a"] == pytest.approx([0.6, 0.0])
    assert clipped["b"] == pytest.approx([0.0, 0.8])


def test_clip_below_threshold_is_noop():
    grads = {"a": np.array([0.3, 0.4])}
    clipped, norm = clip_grad_norm(grads, 1.0)

    assert norm == pytest.approx(0.5)
    assert np.array_equal(clipped["a"], grads["a"])


def test_adam_over_store_swaps_leaves():
    store = ParameterStore()
    store.create("w", np.ones(2))
    leaf = store["w"]
    leaf.grad = np.array([10.0, 0.0])

    norm = Adam(store, lr=0.1, clip_norm=1.0).step()
    assert norm == 10.0
    assert store["w"] is not leaf
    assert store["w"].numpy() == pytest.approx([0.9, 1.0])


def test_variant_flags_are_exclusive():
    with pytest.raises(PydanticValidationError):
        TrainConfig(no_scm=True, entangle=True)


@pytest.mark.parametrize(
    "variant, field, value",
    [
        (Variant.full, "use_scm", True),
        (Variant.entangle, "entangle", True),
        (Variant.no_scm, "use_scm", False),
        (Variant.linear_scm, "nonlinear_scm", False),
        (Variant.no_prior, "use_prior", False),
        (Variant.no_cond, "use_cond", False),
        (Variant.no_gcn, "use_gcn", False),
        (Variant.no_gru, "use_gru", False),
    ],
)
def test_apply_variant(variant, field, value):
    spec = apply_variant(TrainConfig().with_variant(variant), condition_dim=15, n_regions=20)

    assert getattr(spec, field) is value
    assert spec.variant == variant.value
    assert TrainConfig().with_variant(variant).variant is variant


def test_no_cond_variant_forecasts_through_predictor(batch_and_graph):
    spec = apply_variant(TrainConfig(latent_dim=4).with_variant(Variant.no_cond), condition_dim=3, n_regions=3)
    model = CCHMM(spec, seed=0)
    batch, g_hat = batch_and_graph

    assert spec.use_prior is False
    assert spec.use_cond is False
    assert "predictor.W" in model.params
    assert not any(name.startswith("prior.") for name in model.params)
    assert model.rollout(batch, g_hat).forecast_prior is None


def test_zero_learning_rate_keeps_initial_parameters(tiny_bundle, tiny_train_config):
    service = TrainingService(tiny_bundle, tiny_train_config.model_copy(update={"lr": 0.0, "epochs": 1}))
    initial = service.model.params.arrays()

    result = service.fit()
    for name, value in result.model.params.arrays().items():
        assert np.array_equal(value, initial[name])


def test_training_is_reproducible(tiny_bundle, tiny_train_config):
    first = fit(tiny_bundle, tiny_train_config)
    second = fit(tiny_bundle, tiny_train_config)

    assert [r.model_dump() for r in first.log] == [r.model_dump() for r in second.log]
    assert [(r.epoch, r.split) for r in first.log] == [(1, "train"), (1, "val"), (2, "train"), (2, "val")]
    assert len(first.snapshots) == tiny_train_config.epochs + 1


def test_reloaded_checkpoint_reproduces_best_validation_mae(tmp_path, tiny_bundle, tiny_train_config):
    result = fit(tiny_bundle, tiny_train_config)
    CheckpointRepository(tmp_path).save(result.model, tiny_train_config)

    loaded, config = CheckpointRepository(tmp_path).load()
    service = TrainingService(tiny_bundle, config)
    service.model.params.load(loaded.params.arrays())

    assert service.validate(result.best_epoch).mae == result.best_val_mae


def test_training_reduces_loss(tiny_bundle, tiny_train_config):
    result = fit(tiny_bundle, tiny_train_config.model_copy(update={"epochs": 5, "lr": 5e-3}))

    totals = [r.total for r in result.log if r.split == "train"]
    assert totals[-1] < totals[0]
    assert 1 <= result.best_epoch <= 5
    assert result.best_val_mae == min(r.mae for r in result.log if r.split == "val")


def test_non_finite_loss_aborts_with_context(tiny_bundle, tiny_train_config, monkeypatch):
    def explode(*args, **kwargs):
        raise NonFiniteError("total_loss", "component recon_nll is nan")

    monkeypatch.setattr(training, "total_loss", explode)
    with pytest.raises(TrainingDivergedError) as excinfo:
        fit(tiny_bundle, tiny_train_config)
    assert (excinfo.value.epoch, excinfo.value.batch) == (1, 0)
    assert excinfo.value.exit_code == 3


def test_history_longer_than_split_is_rejected(tiny_bundle, tiny_train_config):
    with pytest.raises(ValidationError):
        TrainingService(tiny_bundle, tiny_train_config.model_copy(update={"history": 30}))
