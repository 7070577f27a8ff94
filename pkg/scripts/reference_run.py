from __future__ import annotations

import click

from cchmm.core.logging import configure_logging
from cchmm.repositories.run import RunRepository
from cchmm.schemas.scenario import ScenarioConfig
from cchmm.schemas.training import TrainConfig, Variant
from cchmm.services.reference import REFERENCE_SEEDS, recon_curve_rows, reference_experiment
from cchmm.services.synthetic import synth_generate

CURVE_VARIANTS = (Variant.full, Variant.no_prior)


@click.command()
@click.option("--epochs", type=click.IntRange(min=1), default=30, show_default=True)
@click.option("--seed", "seeds", type=int, multiple=True, default=REFERENCE_SEEDS, show_default=True)
@click.option(
    "--variant",
    "variants",
    type=click.Choice([v.value for v in Variant]),
    multiple=True,
    help="Variants to train; all of them when omitted.",
)
@click.option("--out", type=click.Path(file_okay=False), default="reference_run", show_default=True)
def main(epochs: int, seeds: tuple[int, ...], variants: tuple[str, ...], out: str) -> None:
    """Train every variant on the default scenario, average over seeds and check the acceptance thresholds."""
    configure_logging("INFO")
    scenario = ScenarioConfig()
    bundle = synth_generate(scenario)
    chosen = tuple(Variant(v) for v in variants) or tuple(Variant)
    report = reference_experiment(
        bundle, TrainConfig(epochs=epochs), variants=chosen, seeds=seeds, scenario_seed=scenario.seed
    )

    run = RunRepository(out)
    run.write_model("reference.json", report)
    curves = [v for v in CURVE_VARIANTS if v in chosen]
    if curves:
        run.write_csv("recon_curve.csv", ("epoch", *(v.value for v in curves)), recon_curve_rows(report, curves))
    run.write_run_info("reference_run", epochs=epochs, seeds=list(seeds), variants=[v.value for v in chosen])
    click.echo(report.acceptance.model_dump_json(indent=2))
    if not report.acceptance.passed:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
