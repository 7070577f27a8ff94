import click

from cchmm.commands.common import config_option, handle_errors, set_option
from cchmm.core.errors import ConfigError
from cchmm.models.concepts import MODALITIES
from cchmm.models.data import SPLIT_NAMES
from cchmm.repositories.bundle import BundleRepository
from cchmm.repositories.checkpoint import CheckpointRepository
from cchmm.repositories.run import RunRepository
from cchmm.services.evaluation import BASELINES, EvaluationService
from cchmm.utils.overrides import load_config


@click.command("eval")
@click.option("--data", type=click.Path(exists=True, file_okay=False), default=None, help="Dataset directory.")
@click.option("--checkpoint", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--split", type=click.Choice(SPLIT_NAMES), default="test", show_default=True)
@click.option(
    "--baseline",
    "baselines",
    multiple=True,
    type=click.Choice([name.replace("_", "-") for name in BASELINES]),
    help="Baselines to score; all of them by default.",
)
@click.option("--history", type=int, default=None, help="Window length when no checkpoint is given.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for report.json and plot CSVs.")
@config_option
@set_option
@handle_errors
def command(data, checkpoint, split, baselines, history, out, config_path, assignments):
    """Score forecasts against the naive baselines and, with ground truth, the learned graph."""
    flags = {"paths.data": data, "paths.checkpoint": checkpoint, "paths.out": out, "train.history": history}
    config = load_config(config_path, flags, assignments)
    if config.paths.data is None:
        raise ConfigError("eval needs --data (or paths.data)", key="paths.data")

    bundle = BundleRepository(config.paths.data).load()
    model, train_config = None, config.train
    if config.paths.checkpoint is not None:
        model, train_config = CheckpointRepository(config.paths.checkpoint).load()

    service = EvaluationService(bundle, train_config.history, train_config.mape_threshold)
    if model is not None:
        service.check_compatible(model)
    chosen = tuple(name.replace("-", "_") for name in baselines) or BASELINES
    evaluation = service.evaluate(split, model, chosen)

    click.echo(evaluation.report.model_dump_json(indent=2))
    if config.paths.out is not None:
        run = RunRepository(config.paths.out)
        run.write_model("report.json", evaluation.report)
        if model is not None or "persistence" in chosen:
            for modality in MODALITIES:
                run.write_csv(f"plot_{modality}.csv", ("step", "truth", "prediction"), evaluation.plot_rows(modality))
        run.write_run_info("eval", split=split, checkpoint=config.paths.checkpoint)
