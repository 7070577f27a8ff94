import json

import click

from cchmm.commands.common import handle_errors
from cchmm.repositories.checkpoint import CheckpointRepository
from cchmm.repositories.run import graph_payload, graph_rows


@click.command("export-graph")
@click.option("--checkpoint", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="File to write; stdout if omitted.",
)
@handle_errors
def command(checkpoint, fmt, out):
    """Export the learned causal graph Ã with concept labels."""
    model, _ = CheckpointRepository(checkpoint).load()
    labels = model.concepts.concepts
    matrix = model.causal_adjacency().numpy()

    if fmt == "json":
        text = json.dumps(graph_payload(matrix, labels), indent=2, sort_keys=True) + "\n"
    else:
        lines = [",".join(["", *labels])] + [",".join(row) for row in graph_rows(matrix, labels)]
        text = "\n".join(lines) + "\n"

    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
