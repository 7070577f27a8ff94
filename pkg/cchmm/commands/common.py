import functools
import logging

import click

from cchmm.core.errors import CchmmError
from cchmm.schemas.training import VARIANT_FLAGS, Variant

logger = logging.getLogger(__name__)

config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON config with scenario/train/paths sections.",
)
set_option = click.option(
    "--set",
    "assignments",
    multiple=True,
    metavar="SECTION.KEY=VALUE",
    help="Override one config field; repeatable, applied last.",
)
seed_option = click.option("--seed", type=int, default=None, help="Overrides the config and CCHMM_SEED.")
variant_option = click.option(
    "--variant",
    type=click.Choice([v.value for v in Variant]),
    default=None,
    help="Ablation variant to build.",
)


def handle_errors(func):
    """Turn CchmmError into an error line on stderr and the error's exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CchmmError as exc:
            logger.debug("command failed", exc_info=True)
            click.echo(f"error: {exc}", err=True)
            raise click.exceptions.Exit(exc.exit_code) from exc

    return wrapper


def variant_overrides(variant: str | None) -> dict[str, bool]:
    """Flag overrides selecting exactly one ablation variant (all off for ``full``)."""
    if variant is None:
        return {}
    return {f"train.{flag}": flag.replace("_", "-") == variant for flag in VARIANT_FLAGS}
