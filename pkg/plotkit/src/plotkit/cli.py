"""``plotkit traces|sweep --spec <json>``: render harness CSVs to SVG/PNG."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, plot_delta_sweep, plot_traces


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render optimizer trace/sweep CSVs to figures."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("traces", "line plot of one or more trace CSVs"),
        ("sweep", "loss-vs-delta plot of a sweep matrix CSV"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--spec", required=True, help="JSON figure spec")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec.from_json(args.spec)
        render = plot_traces if args.command == "traces" else plot_delta_sweep
        out = render(spec)
    except Exception as exc:  # noqa: BLE001 - single CLI error path
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
