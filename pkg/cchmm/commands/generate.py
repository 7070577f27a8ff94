import click

from cchmm.commands.common import config_option, handle_errors, seed_option, set_option
from cchmm.core.errors import ConfigError
from cchmm.repositories.bundle import BundleRepository
from cchmm.repositories.run import RunRepository
from cchmm.services.synthetic import synth_generate
from cchmm.utils.overrides import load_config


@click.command("generate")
@config_option
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Dataset directory to write.")
@seed_option
@set_option
@handle_errors
def command(config_path, out, seed, assignments):
    """Generate a synthetic scenario with a known causal graph."""
    config = load_config(config_path, {"scenario.seed": seed, "paths.out": out}, assignments)
    if config.paths.out is None:
        raise ConfigError("an output directory is required (--out or paths.out)", key="paths.out")

    bundle = synth_generate(config.scenario)
    BundleRepository(config.paths.out).save(bundle)
    run = RunRepository(config.paths.out)
    run.write_model("config.json", config)
    run.write_run_info("generate", seed=config.scenario.seed)
    click.echo(f"wrote {bundle.timesteps} steps x {bundle.n_regions} regions to {config.paths.out}")
