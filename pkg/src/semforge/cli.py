"""Command line entry points.

semforge fit <model.txt> <data.csv> [--objective MLW] [--method SLSQP] [--stats]
semforge generate <config.json> -o <dir> [--seed N]
semforge bench <campaign.json> -o <dir> [--seed N]

Objectives may be warm-start chains such as "ULS+MLW" (fit each stage in
order, each starting from the previous solution). Exit code 0 on success,
2 on hard errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from .bench import campaign_from_dict, run_campaign, summarize, write_results
from .data import load_csv
from .errors import SemforgeError
from .fitting import fit_model
from .generator import GenConfig, generate, write_case
from .stats import gather, report


def _objective_chain(spec: str):
    parts = [p for p in re.split(r"[+,]", spec) if p.strip()]
    if not parts:
        raise ValueError(f"empty objective spec: {spec!r}")
    return parts if len(parts) > 1 else parts[0]


def _cmd_fit(args) -> int:
    model_text = Path(args.model).read_text()
    data = load_csv(args.data)
    fit = fit_model(model_text, data,
                    objective=_objective_chain(args.objective),
                    method=args.method)
    if args.stats:
        gather(fit)
    print(report(fit))
    return 0


def _cmd_generate(args) -> int:
    payload = json.loads(Path(args.config).read_text())
    config = GenConfig.from_dict(payload)
    case = generate(config, seed=args.seed)
    paths = write_case(case, args.out)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return 0


def _cmd_bench(args) -> int:
    payload = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        payload["seed"] = args.seed
    campaign = campaign_from_dict(payload)
    records = run_campaign(campaign)
    paths = write_results(records, args.out)
    summary = summarize(records)
    for label in summary["sets"]:
        n_cases = summary["cases_per_set"][label]
        for g in summary["grid"]:
            fails = summary["failures"][label][g]
            wall = summary["wall_time"][label][g]
            print(f"{label:>8}  {g:<20} failures {fails:>4}/{n_cases:<4}"
                  f"  wall {wall:8.2f}s")
    print(f"records: {paths['records']}")
    print(f"summary: {paths['summary']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semforge",
        description="Structural equation model estimation and benchmarking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="estimate a model from a CSV dataset")
    p_fit.add_argument("model", help="model description file")
    p_fit.add_argument("data", help="CSV dataset (index column + header)")
    p_fit.add_argument("--objective", default="MLW",
                       help="objective or warm-start chain, e.g. MLW or ULS+MLW")
    p_fit.add_argument("--method", default="SLSQP",
                       help="optimizer (SLSQP, L-BFGS-B, Adam, Nesterov, SGD)")
    p_fit.add_argument("--stats", action="store_true",
                       help="report standard errors, p-values and fit indices")
    p_fit.set_defaults(func=_cmd_fit)

    p_gen = sub.add_parser("generate", help="generate a synthetic model + data")
    p_gen.add_argument("config", help="generator config JSON")
    p_gen.add_argument("-o", "--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_gen.set_defaults(func=_cmd_generate)

    p_bench = sub.add_parser("bench", help="run a benchmark campaign")
    p_bench.add_argument("config", help="campaign JSON")
    p_bench.add_argument("-o", "--out", required=True, help="output directory")
    p_bench.add_argument("--seed", type=int, default=None,
                         help="override the campaign master seed")
    p_bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except (SemforgeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
