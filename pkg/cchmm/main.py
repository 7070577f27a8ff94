import click
import sentry_sdk

from cchmm import __version__
from cchmm.commands import evaluate, export_graph, generate, gradcheck, train
from cchmm.core.config import get_settings
from cchmm.core.logging import configure_logging


@click.group()
@click.version_option(__version__, prog_name="cchmm")
@click.option("--log-level", default=None, help="Overrides CCHMM_LOG_LEVEL.")
def cli(log_level):
    """Causal conditional HMM for multimodal traffic forecasting."""
    settings = get_settings()
    configure_logging(log_level or settings.log_level)
    if settings.sentry_dsn:
        sentry_sdk.init(
            dsn=settings.sentry_dsn,
            environment=settings.sentry_environment,
            traces_sample_rate=settings.sentry_traces_sample_rate,
        )


# Commands
cli.add_command(generate.command)
cli.add_command(train.command)
cli.add_command(evaluate.command)
cli.add_command(gradcheck.command)
cli.add_command(export_graph.command)


if __name__ == "__main__":
    cli()
