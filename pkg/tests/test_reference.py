import numpy as np
import pytest

from cchmm.schemas.reports import VariantRun
from cchmm.schemas.training import Variant
from cchmm.services.reference import acceptance, recon_curve_rows, reference_experiment, summarize


def _run(variant: str, seed: int = 7, speed: float = 2.0, ratio: float = 0.8, auc: float | None = 0.9) -> VariantRun:
    return VariantRun(
        variant=variant,
        seed=seed,
        best_epoch=1,
        mae={"bike": 1.0, "v": speed},
        persistence_ratio={"bike": ratio, "v": ratio},
        auc=auc,
        acyclicity=0.0,
        recon_curve=[3.0, 2.0],
    )


def test_summary_averages_over_seeds():
    runs = [_run("full", seed=7, speed=2.0, auc=0.9), _run("full", seed=8, speed=4.0, auc=None)]
    runs[1] = runs[1].model_copy(update={"recon_curve": [5.0, 4.0]})

    summary = summarize(runs)
    assert summary.seeds == [7, 8]
    assert summary.mae["v"] == pytest.approx(3.0)
    assert summary.auc == pytest.approx(0.9)
    assert summary.recon_curve == pytest.approx([4.0, 3.0])


def test_acceptance_passes_on_ordered_runs():
    runs = [
        _run("full", speed=1.0),
        _run("no-scm", speed=1.5),
        _run("entangle", speed=2.0),
        _run("full", seed=8, ratio=2.0),
    ]

    assert acceptance(runs, seed=7).passed


@pytest.mark.parametrize(
    "runs, failed",
    [
        ([_run("full", ratio=0.95), _run("no-scm"), _run("entangle")], "beats_persistence"),
        ([_run("full", auc=0.7), _run("no-scm"), _run("entangle")], "recovers_graph"),
        ([_run("full", auc=None), _run("no-scm"), _run("entangle")], "recovers_graph"),
        ([_run("full", speed=3.0), _run("no-scm"), _run("entangle")], "speed_ordering"),
        ([_run("full"), _run("entangle")], "speed_ordering"),
    ],
)
def test_acceptance_flags_each_threshold(runs, failed):
    report = acceptance(runs, seed=7)

    assert not report.passed
    assert getattr(report, failed) is False


def test_reference_experiment_covers_every_variant_and_seed(tiny_bundle, tiny_train_config):
    base = tiny_train_config.model_copy(update={"epochs": 2})
    report = reference_experiment(tiny_bundle, base, seeds=(5, 6), scenario_seed=5)

    assert len(report.runs) == 2 * len(Variant)
    assert set(report.summaries) == {v.value for v in Variant}
    for run in report.runs:
        assert len(run.recon_curve) == 2
        assert all(np.isfinite(run.recon_curve))
    no_prior = report.summaries[Variant.no_prior.value]
    assert no_prior.seeds == [5, 6]

    rows = recon_curve_rows(report, (Variant.full, Variant.no_prior))
    assert [row[0] for row in rows] == [1, 2]
    assert float(rows[1][2]) == pytest.approx(no_prior.recon_curve[1])
