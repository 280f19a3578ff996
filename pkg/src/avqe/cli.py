"""Command-line entry point: ``avqe <subcommand> [--config PATH] ...``."""

from __future__ import annotations

import argparse
import sys
import time

from .errors import AvqeError, ConfigInvalid
from .harness import EXIT_CONFIG, load_config, run, write_outcome

COMMANDS = ["track", "verify", "bounds", "shots", "oracle", "bp-variance", "sweep"]


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avqe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (default runs/<command>)")
        p.add_argument("--oracle", type=_on_off, metavar="on|off")
        p.add_argument("--guarantee", type=_on_off, metavar="on|off")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.oracle is not None:
        overrides["use_oracle"] = args.oracle
    if args.guarantee is not None:
        overrides["guarantee"] = args.guarantee
    try:
        cfg = load_config(args.config, overrides)
        start = time.perf_counter()
        outcome = run(args.command, cfg)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AvqeError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out_dir = args.out or cfg["output"].get("dir") or f"runs/{args.command}"
    path = write_outcome(outcome, out_dir, time.perf_counter() - start)
    if "bounds.txt" in outcome.files:
        print(outcome.files["bounds.txt"], end="")
    s = outcome.summary
    keys = [k for k in ("completed", "slices", "n_updates", "final_fidelity", "final_fidelity_bound",
                        "success_rate", "all_pass", "delta_min") if k in s]
    print(f"{args.command}: " + ", ".join(f"{k}={s[k]}" for k in keys) + f" -> {path}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
