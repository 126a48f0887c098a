"""Command-line entry point.

::

    mmimou run fig4_wifi_cdf --n 16,32,64 --drops 100 --seed 7 --out results
    mmimou run custom --config my.toml --set scheduler.d_nulls=24 --n 64
    mmimou validate
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import checks, experiments, report
from .config import ConfigError, parse_config
from .sim import DropError

log = logging.getLogger("mmimou")


def _int_list(text):
    try:
        return [int(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_config_flags(p):
    p.add_argument("--config", metavar="PATH", help="key = value config file (TOML subset)")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                   help="override a config key; repeatable")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--drops", type=int, help="Monte Carlo drops per sweep point")
    p.add_argument("--threads", type=int, help="worker processes for drops")
    p.add_argument("--full-scale", action="store_true",
                   help="19-site layout instead of the 7-site desk default")


def build_parser():
    parser = argparse.ArgumentParser(prog="mmimou", description="Massive MIMO unlicensed coexistence simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV tables")
    run.add_argument("experiment", help="one of: " + ", ".join(experiments.EXPERIMENTS))
    _add_config_flags(run)
    run.add_argument("--out", metavar="DIR", help="output directory (default: sim.out_dir)")
    run.add_argument("--n", type=_int_list, metavar="N[,N...]", help="BS antenna counts")

    val = sub.add_parser("validate", help="run the fast invariant suite")
    _add_config_flags(val)
    val.add_argument("--tol", metavar="NAME=VALUE", action="append", default=[],
                     help="override an invariant tolerance; repeatable")

    sub.add_parser("list", help="list experiments")
    return parser


def _resolve_config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        overrides.append(f"sim.seed={args.seed}")
    if args.drops is not None:
        overrides.append(f"sim.drops={args.drops}")
    if args.threads is not None:
        overrides.append(f"sim.threads={args.threads}")
    if args.full_scale:
        overrides.append("layout.num_sites=19")
    if getattr(args, "out", None):
        overrides.append(f'sim.out_dir="{args.out}"')
    return parse_config(args.config, overrides)


def cmd_run(args, parser) -> int:
    if args.experiment not in experiments.EXPERIMENTS:
        parser.print_usage(sys.stderr)
        print(f"mmimou: unknown experiment {args.experiment!r}; choose from "
              + ", ".join(experiments.EXPERIMENTS), file=sys.stderr)
        return 2
    cfg = _resolve_config(args)
    out_dir = cfg.sim.out_dir
    manifest = report.RunManifest(out_dir, args.experiment, cfg, cfg.sim.seed, sys.argv[1:])
    paths = []
    try:
        for table in experiments.run(args.experiment, cfg, args.n):
            paths.append(report.write_table(table, out_dir))
            log.info("wrote %s", paths[-1])
    except (ConfigError, DropError, ValueError, RuntimeError) as exc:
        manifest.finalize(paths, status="error", error=exc)
        raise
    manifest.finalize(paths)
    for p in paths:
        print(p)
    return 0


def cmd_validate(args) -> int:
    _resolve_config(args)
    tol = {}
    for item in args.tol:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol {item!r} is not of the form name=value")
        tol[name.strip()] = float(value)
    try:
        results = checks.run_checks(tol)
    except KeyError as exc:
        raise ConfigError(f"{exc.args[0]}; known: {', '.join(checks.TOLERANCES)}") from None
    print(checks.format_results(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("FAILED: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            print("\n".join(experiments.EXPERIMENTS))
            return 0
        if args.command == "validate":
            return cmd_validate(args)
        return cmd_run(args, parser)
    except (ConfigError, DropError, OSError) as exc:
        print(f"mmimou: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
