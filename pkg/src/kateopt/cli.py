"""Command-line front end: ``opt run|sweep|tune|invariance|fetch``.

Configs come from a JSON file (``--config``) whose keys mirror the
RunConfig fields, with individual flags overriding file values. Exit codes:
0 = completed (including diverged runs and failed-but-measured checks),
1 = internal error, 2 = invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import FetchError, IntegrityError
from .harness import (
    DEFAULT_BETA_GRID,
    DEFAULT_CHECKPOINTS,
    DEFAULT_DELTA_GRID,
    ConfigError,
    RunConfig,
    cmd_fetch,
    cmd_invariance,
    cmd_run,
    cmd_sweep_delta,
    cmd_tune,
)
from .optim import OPTIMIZER_NAMES

DEFAULT_CACHE = Path.home() / ".cache" / "kateopt"


def _parse_beta(text: str):
    return text if text == "paper" else float(text)


def _parse_eta(text: str):
    if text == "grad_init":
        return text
    if "," in text:
        return [float(tok) for tok in text.split(",") if tok]
    return float(text)


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


def _parse_ints(text: str) -> list[int]:
    return [int(float(tok)) for tok in text.split(",") if tok]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opt",
        description="Benchmark harness for the KATE optimizer and its baselines.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, help="JSON config file (RunConfig fields)")
        p.add_argument("--optimizer", choices=OPTIMIZER_NAMES)
        p.add_argument("--beta", type=_parse_beta, help="positive float or 'paper'")
        p.add_argument(
            "--eta",
            type=_parse_eta,
            help="float, comma-separated vector, or 'grad_init'; mini-batch "
            "gradients are per-batch means, so eta is comparable across batch sizes",
        )
        p.add_argument("--delta", type=float)
        p.add_argument("--T", type=int, dest="T")
        p.add_argument("--batch", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--log-every", type=int, dest="log_every")
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--cache", type=Path, default=DEFAULT_CACHE, help="dataset cache dir")

    p_run = sub.add_parser("run", help="single configuration, one trace per trial")
    add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="loss matrix over a delta grid")
    add_common(p_sweep)
    p_sweep.add_argument("--deltas", type=_parse_floats, default=list(DEFAULT_DELTA_GRID))
    p_sweep.add_argument(
        "--optimizers",
        type=lambda s: [tok for tok in s.split(",") if tok],
        default=list(OPTIMIZER_NAMES),
    )
    p_sweep.add_argument("--checkpoints", type=_parse_ints, default=list(DEFAULT_CHECKPOINTS))
    p_sweep.add_argument("--workers", type=int, default=1)

    p_tune = sub.add_parser("tune", help="grid-search beta by mean final loss")
    add_common(p_tune)
    p_tune.add_argument("--betas", type=_parse_floats, default=list(DEFAULT_BETA_GRID))

    p_inv = sub.add_parser("invariance", help="scaled-vs-unscaled lockstep comparison")
    add_common(p_inv)

    p_fetch = sub.add_parser("fetch", help="download benchmark datasets into the cache")
    p_fetch.add_argument("--cache", type=Path, default=DEFAULT_CACHE)
    p_fetch.add_argument(
        "--names",
        type=lambda s: tuple(tok for tok in s.split(",") if tok),
        default=("heart", "australian", "splice"),
    )
    return parser


def load_config(args) -> RunConfig:
    raw = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
    for name in RunConfig.FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    return RunConfig.from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        if args.command == "fetch":
            result = cmd_fetch(args.cache, names=args.names)
        else:
            config = load_config(args)
            if args.command == "run":
                result = cmd_run(config, args.out, cache_dir=args.cache)
            elif args.command == "sweep":
                result = cmd_sweep_delta(
                    config,
                    deltas=args.deltas,
                    optimizers=args.optimizers,
                    out_dir=args.out,
                    cache_dir=args.cache,
                    checkpoints=args.checkpoints,
                    workers=args.workers,
                )
            elif args.command == "tune":
                result = cmd_tune(config, beta_grid=args.betas, out_dir=args.out,
                                  cache_dir=args.cache)
            elif args.command == "invariance":
                result = cmd_invariance(config, out_dir=args.out, cache_dir=args.cache)
            else:  # pragma: no cover - argparse enforces the choices
                raise ConfigError(f"unknown command {args.command!r}")
        json.dump(result, sys.stdout, sort_keys=True, indent=2, default=str)
        sys.stdout.write("\n")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FetchError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - exit-code contract
        logging.getLogger(__name__).exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
