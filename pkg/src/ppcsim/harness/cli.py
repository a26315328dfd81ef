"""Command line entry point: ``ppcsim run --scenario NAME [--config PATH] ...``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import SCENARIOS, U64_MAX, ConfigError, validate_config
from .scenarios import run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _seed(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that code is reserved for runtime errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ppcsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run one scenario and write its trace, header and figure")
    run.add_argument("--scenario", choices=SCENARIOS, help="overrides the config's scenario")
    run.add_argument("--config", type=Path, help="JSON config; omitted fields take defaults")
    run.add_argument("--seed", type=_seed, help="overrides the config's seed")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--ablation", action="store_true",
                     help="withhold proprioception after initialisation (eye-control)")
    sub.add_parser("scenarios", help="list scenario names")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenarios":
        print("\n".join(SCENARIOS))
        return EXIT_OK

    try:
        text = args.config.read_text(encoding="utf-8") if args.config else None
    except OSError as exc:
        print(f"config: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = validate_config(text)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG

    changes = {}
    if args.scenario is not None:
        changes["scenario"] = args.scenario
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.ablation or changes.get("scenario", cfg.scenario) == "ablation":
        changes["ablation"] = True
    cfg = cfg.replace(**changes)

    try:
        summary = run_scenario(cfg, args.out)
    except Exception as exc:  # report, never traceback, on the CLI
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({"scenario": cfg.scenario, "seed": cfg.seed, "out": str(args.out),
                      "summary": summary}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
