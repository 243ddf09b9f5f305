"""plotviz command line: render scan tables to figures.

    plotviz heatmap --config spec.json
    plotviz lines --config spec.json

The config file holds a figure spec: {"inputs": [...], "output": "fig.png",
"log_color": true, "log_x": true, "x_label": ..., "styles": {...}}.
Inputs are rydcz scan tables (.json or .csv); output is written as both
PNG and SVG next to the given path.
"""

from __future__ import annotations

import argparse
import sys

import matplotlib.pyplot as plt

from .figures import FigureSpec, plot_heatmap, plot_lines
from .tables import TableFormatError


def build_parser():
    p = argparse.ArgumentParser(prog="plotviz", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = p.add_subparsers(dest="command", required=True)
    for name in ("heatmap", "lines"):
        sub = subs.add_parser(name, help=f"render a {name} figure")
        sub.add_argument("--config", required=True, help="figure spec JSON file")
    return p


def cli_main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec.from_json(args.config)
        render = plot_heatmap if args.command == "heatmap" else plot_lines
        fig, (png, svg) = render(spec)
        plt.close(fig)
        print(f"wrote {png} and {svg}")
        return 0
    except (TableFormatError, OSError, ValueError) as exc:
        print(f"plotviz: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
