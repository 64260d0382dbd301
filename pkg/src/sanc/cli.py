"""Command line: ``sanc run <config>`` and ``sanc bounds``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import ConfigError, run_experiment, validate_config
from .sampling import SamplingConstants, gradient_batch_size, hessian_batch_size

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _seed_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sanc", description="Stochastic cubic-regularization benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="JSON config file")
    r.add_argument("--seed-list", type=_seed_list, help="comma-separated seeds (overrides config)")
    r.add_argument("--budget", type=int, help="oracle-call budget per run (overrides config)")
    r.add_argument("--out", help="output directory (overrides config)")
    r.add_argument("--workers", type=int, help="parallel worker processes (overrides config)")

    b = sub.add_parser("bounds", help="print gradient and Hessian sample-size bounds")
    b.add_argument("--L0", type=float, required=True)
    b.add_argument("--L1", type=float, required=True)
    b.add_argument("--delta", type=float, required=True)
    b.add_argument("--eps-g", type=float, required=True)
    b.add_argument("--eps-B", type=float, required=True)
    b.add_argument("--dim", type=int, required=True)
    return p


def _cmd_run(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if isinstance(raw, dict):
        for key, value in (("seeds", args.seed_list), ("budget", args.budget), ("out", args.out), ("workers", args.workers)):
            if value is not None:
                raw[key] = value
    try:
        cfg = validate_config(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summaries = run_experiment(cfg)
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for s in summaries:
        print(
            f"{s.optimizer:5s} seed={s.seed:<3d} loss={s.final_loss:.8g} iters={s.iterations} "
            f"calls={s.oracle_calls} unsuccessful={s.unsuccessful} stop={s.stop_reason} {s.wall_time:.2f}s"
        )
    print(f"wrote {cfg.out}")
    return EXIT_RUNTIME if any(s.stop_reason == "error" for s in summaries) else EXIT_OK


def _cmd_bounds(args) -> int:
    try:
        # L2 does not enter either bound; L1 stands in to satisfy validation.
        c = SamplingConstants(args.L0, args.L1, args.L1, args.delta, args.eps_g, args.eps_B)
        size_g, size_B = gradient_batch_size(c), hessian_batch_size(c, args.dim)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"gradient_batch_size {size_g}")
    print(f"hessian_batch_size {size_B}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return _cmd_run(args) if args.command == "run" else _cmd_bounds(args)


if __name__ == "__main__":
    sys.exit(main())
