import click

from cchmm.commands.common import handle_errors, seed_option, variant_option
from cchmm.core.errors import GradientCheckError
from cchmm.repositories.run import RunRepository
from cchmm.schemas.training import Variant
from cchmm.services.gradcheck import GRADCHECK_TOLERANCE, SIZES, GradientCheckService


@click.command("gradcheck")
@click.option("--size", type=click.Choice(sorted(SIZES)), default="small", show_default=True)
@variant_option
@click.option(
    "--max-elements",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="Entries checked per parameter; 0 checks every entry.",
)
@click.option("--tolerance", type=float, default=GRADCHECK_TOLERANCE, show_default=True)
@seed_option
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for gradcheck.json.")
@handle_errors
def command(size, variant, max_elements, tolerance, seed, out):
    """Compare analytic gradients of the total loss with central differences on a tiny model."""
    service = GradientCheckService(
        size=size,
        variant=Variant(variant or Variant.full.value),
        seed=seed or 0,
        max_elements=max_elements or None,
        tolerance=tolerance,
    )
    report = service.run()
    click.echo(report.model_dump_json(indent=2))
    if out is not None:
        run = RunRepository(out)
        run.write_model("gradcheck.json", report)
        run.write_run_info("gradcheck", size=size)
    if not report.passed:
        raise GradientCheckError(report.worst_parameter, report.max_rel_err, report.tolerance, op=report.worst_op)
