import click

from cchmm.commands.common import (
    config_option,
    handle_errors,
    seed_option,
    set_option,
    variant_option,
    variant_overrides,
)
from cchmm.core.errors import ConfigError
from cchmm.repositories.bundle import BundleRepository
from cchmm.repositories.checkpoint import CheckpointRepository
from cchmm.repositories.run import RunRepository, graph_payload
from cchmm.services.training import TrainingService
from cchmm.utils.overrides import load_config


@click.command("train")
@click.option("--data", type=click.Path(exists=True, file_okay=False), default=None, help="Dataset directory.")
@config_option
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Run directory to write.")
@variant_option
@click.option("--epochs", type=int, default=None)
@seed_option
@set_option
@handle_errors
def command(data, config_path, out, variant, epochs, seed, assignments):
    """Train a model and write its checkpoint, loss log and learned graphs."""
    flags = {"paths.data": data, "paths.out": out, "train.epochs": epochs, "train.seed": seed}
    config = load_config(config_path, {**flags, **variant_overrides(variant)}, assignments)
    if config.paths.data is None or config.paths.out is None:
        raise ConfigError("train needs --data and --out (or paths.data and paths.out)", key="paths")

    bundle = BundleRepository(config.paths.data).load()
    service = TrainingService(bundle, config.train)
    result = service.fit()

    run = RunRepository(config.paths.out)
    labels = result.model.concepts.concepts
    CheckpointRepository(run.path("checkpoint")).save(result.model, config.train, {"best_epoch": result.best_epoch})
    run.write_model("config.json", config)
    run.write_jsonl("log.jsonl", result.log)
    run.write_jsonl(
        "graphs.jsonl",
        [{"epoch": epoch, **graph_payload(matrix, labels)} for epoch, matrix in enumerate(result.snapshots)],
    )
    run.write_graph("A_final.json", result.model.causal_adjacency().numpy(), labels)
    run.write_run_info("train", variant=config.train.variant.value, best_epoch=result.best_epoch)
    click.echo(f"trained {config.train.variant.value} for {config.train.epochs} epochs, best epoch {result.best_epoch}")
