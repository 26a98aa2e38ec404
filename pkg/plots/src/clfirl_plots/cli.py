"""plots <figure> --in <dir> --out <file> [--levels N] [--colormap NAME]"""

import sys

import click

from .figures import FIGURES, PlotJob


@click.command()
@click.argument("figure", type=click.Choice(sorted(FIGURES)))
@click.option("--in", "input_dir", required=True, type=click.Path(),
              help="Directory with the exported experiment CSVs.")
@click.option("--out", "output_path", required=True, type=click.Path(),
              help="Output image path (extension selects the format).")
@click.option("--levels", type=int, default=12, show_default=True)
@click.option("--colormap", default="viridis", show_default=True)
@click.option("--dpi", type=int, default=200, show_default=True)
def main(figure, input_dir, output_path, levels, colormap, dpi):
    """Render a figure from exported experiment CSVs."""
    job = PlotJob(input_dir=input_dir, output_path=output_path,
                  levels=levels, colormap=colormap, dpi=dpi)
    try:
        path = FIGURES[figure](job)
    except (FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
