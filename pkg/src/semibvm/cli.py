"""Command-line front end: ``semibvm {run,suite,plots,validate-config}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from .config import ConfigError, parse_flat, apply_overrides, from_flat, serialize_config
from .experiments import PLOT_HEADER, SUITES, emit_plots_data, run_scenario, run_suite


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _flat_overrides(args) -> dict:
    """Config file keys, then ``--set`` pairs, then the dedicated flags."""
    flat = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            flat.update(parse_flat(fh.read()))
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError([f"{item}: expected key=value"])
        try:
            flat[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            flat[key.strip()] = value
    if getattr(args, "seed", None) is not None:
        flat["master_seed"] = args.seed
    if getattr(args, "pilot_reuse", False):
        flat["pilot.reuse"] = True
    return flat


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="scenario file of 'key = value' lines")
    p.add_argument("--seed", type=_u64, metavar="U64", help="master seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--jobs", type=int, metavar="N", help="worker processes (default: all cores)")
    p.add_argument("--pilot-reuse", action="store_true",
                   help="fit the pilot on the inference data instead of a held-out split")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semibvm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    _add_common(run)

    suite = sub.add_parser("suite", help="run a canned experiment grid")
    suite.add_argument("name", choices=SUITES)
    _add_common(suite)

    plots = sub.add_parser("plots", help="tidy suite results into long-format CSV")
    plots.add_argument("results_dir")
    plots.add_argument("--out", metavar="FILE", default="-", help="CSV path ('-' for stdout)")

    val = sub.add_parser("validate-config", help="check a scenario file and print its normal form")
    val.add_argument("--config", metavar="PATH", required=True)
    val.add_argument("--set", action="append", metavar="KEY=VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-config":
            cfg = from_flat(_flat_overrides(args))
            sys.stdout.write(serialize_config(cfg))
            return 0
        if args.command == "run":
            cfg = from_flat(_flat_overrides(args))
            if args.out:
                cfg = apply_overrides(cfg, [f"out_path={json.dumps(args.out)}"])
            _, summary = run_scenario(cfg, cfg.out_path or "results", args.jobs)
            json.dump(summary["aggregate"], sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
            return 0
        if args.command == "suite":
            result = run_suite(args.name, _flat_overrides(args), args.out or f"results/{args.name}", args.jobs)
            failed = [c["cell"] for c in result["cells"] if c["status"] != "ok"]
            for cell in result["cells"]:
                print(f"{cell['cell']}: {cell['status']}")
            return 1 if failed else 0
        if args.command == "plots":
            rows, problems = emit_plots_data(args.results_dir, None if args.out == "-" else args.out)
            if args.out == "-":
                writer = csv.writer(sys.stdout, lineterminator="\n")
                writer.writerow(PLOT_HEADER)
                writer.writerows(rows)
            for p in problems:
                print(f"skipped {p}", file=sys.stderr)
            return 0
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
