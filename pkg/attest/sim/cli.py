# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import argparse
import dataclasses
import logging
import pathlib
import sys
from typing import List, Optional, Sequence

import numpy as np

from attest.errors import (
    ConfigError,
    DegenerateObservationsError,
    EmptyIntersectionError,
    IllConditionedError,
    NoConvergenceError,
)
from attest.utils import Timer

from .metrics import emit_metrics, emit_summary
from .scenario import (
    ScenarioConfig,
    ScenarioSummary,
    load_config,
    measurement_records,
    run_scenario,
    section_v_config,
    summarize,
    validate,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_NUMERICAL_ERRORS = (
    NoConvergenceError,
    EmptyIntersectionError,
    IllConditionedError,
    DegenerateObservationsError,
)


def parse_seeds(text: str) -> List[int]:
    try:
        if ".." in text:
            first, last = (int(s) for s in text.split("..", 1))
        else:
            first = last = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"Invalid seed range {text}; use N..M.")
    if last < first:
        raise argparse.ArgumentTypeError(f"Empty seed range {text}.")
    return list(range(first, last + 1))


def _add_run_arguments(parser: argparse.ArgumentParser):
    seeds = parser.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, default=None, help="RNG seed.")
    seeds.add_argument(
        "--seeds", type=parse_seeds, default=None, help="Inclusive seed range N..M."
    )
    parser.add_argument(
        "--out", type=pathlib.Path, default=pathlib.Path("."), help="Output dir."
    )
    parser.add_argument(
        "--format", choices=["csv", "json", "both"], default="csv", dest="fmt"
    )
    parser.add_argument(
        "--boundary-noise",
        action="store_true",
        help="Draw noise on the boundary of its bounding ellipsoid.",
    )
    parser.add_argument(
        "--emit-predicted",
        action="store_true",
        help="Write a record for every integration step.",
    )
    parser.add_argument(
        "--no-fallback",
        action="store_true",
        help="Fail on an empty intersection instead of adopting the measurement.",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="estimate",
        description="Deterministic attitude estimation on SO(3).",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run a scenario file.")
    run.add_argument("--config", type=pathlib.Path, required=True)
    _add_run_arguments(run)

    check = subparsers.add_parser("validate", help="Validate a scenario file.")
    check.add_argument("--config", type=pathlib.Path, required=True)

    demo = subparsers.add_parser(
        "demo-sectionV", help="Run the built-in quarter-orbit spacecraft scenario."
    )
    _add_run_arguments(demo)
    return parser


def _run_seeds(
    cfg: ScenarioConfig, seeds: Sequence[int], args: argparse.Namespace
) -> List[ScenarioSummary]:
    args.out.mkdir(parents=True, exist_ok=True)
    summaries = []
    for seed in seeds:
        seed_cfg = dataclasses.replace(
            cfg, seed=seed, boundary_noise=cfg.boundary_noise or args.boundary_noise
        )
        with Timer("cpu") as timer:
            records = run_scenario(seed_cfg, fallback=not args.no_fallback)
        if not args.emit_predicted:
            records = measurement_records(records)
        emit_metrics(records, args.fmt, args.out / f"metrics_seed{seed}")
        summary = summarize(records, seed=seed)
        summaries.append(summary)
        logger.info(
            f"seed {seed}: terminal attitude error "
            f"{summary.terminal_zeta_deg:.4f} deg, terminal tr P "
            f"{summary.terminal_trace_P:.4e}, containment "
            f"{summary.containment_ratio:.2f} ({timer.elapsed_time:.2f} s)"
        )
    if len(seeds) > 1:
        errors = np.array([s.terminal_zeta_deg for s in summaries])
        statistics = {
            "median_terminal_zeta_deg": float(np.median(errors)),
            "p90_terminal_zeta_deg": float(np.percentile(errors, 90)),
            "first_measurement_drop_count": int(
                sum(s.first_measurement_drop for s in summaries)
            ),
            "full_containment_count": int(
                sum(s.containment_ratio == 1.0 for s in summaries)
            ),
        }
        emit_summary(summaries, statistics, args.out / "summary.json")
        logger.info(
            f"{len(seeds)} seeds: median terminal attitude error "
            f"{statistics['median_terminal_zeta_deg']:.4f} deg, 90th percentile "
            f"{statistics['p90_terminal_zeta_deg']:.4f} deg"
        )
    return summaries


def _main(args: argparse.Namespace) -> int:
    if args.command == "demo-sectionV":
        cfg = section_v_config()
    else:
        cfg = load_config(args.config)

    ratio = validate(cfg)
    logger.info(f"x0^T P0^-1 x0 = {ratio:.4f}")
    if args.command == "validate":
        print(f"valid: x0^T P0^-1 x0 = {ratio:.4f}")
        return EXIT_OK

    if args.seeds is not None:
        seeds = args.seeds
    elif args.seed is not None:
        seeds = [args.seed]
    else:
        seeds = [cfg.seed]
    _run_seeds(cfg, seeds, args)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="[%(asctime)s][%(name)s][%(levelname)s] - %(message)s",
    )
    try:
        return _main(args)
    except ConfigError as err:
        logger.error(f"Invalid configuration: {err}")
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as err:
        logger.error(f"Numerical failure: {err}")
        return EXIT_NUMERICAL
    except OSError as err:
        logger.error(f"I/O failure: {err}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
