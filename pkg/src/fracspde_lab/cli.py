"""Command-line entry point: run the suites of one subcommand and write artifacts."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import yaml
from pydantic import ValidationError

from fracspde_lab.config import ExperimentConfig, config_hash, load_config
from fracspde_lab.errors import (
    DivergentInversionError,
    ParameterWindowError,
    PicardDivergenceError,
    QuadratureError,
)
from fracspde_lab.reports import (
    EstimateReport,
    write_csv,
    write_manifest,
    write_report_samples,
)
from fracspde_lab.suites import SUBCOMMANDS, SUITES, RunContext, suites_for
from fracspde_lab.workers import set_default_threads

logger = logging.getLogger("fracspde_lab")

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_WINDOW = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracspde-lab", description="Numerical laboratory for time-fractional SPDEs"
    )
    parser.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS, help="Suite group to run")
    parser.add_argument("--config", "-c", help="Path to YAML config file")
    parser.add_argument("--seed", type=int, help="Override the noise seed")
    parser.add_argument("--threads", type=int, help="Worker thread cap")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--list-suites", action="store_true", help="List suites and exit")
    parser.add_argument("--log-level", default="INFO", help="Logging level")
    return parser


def list_suites(subcommand: str | None = None) -> list[str]:
    lines = []
    for name in SUBCOMMANDS:
        if subcommand is not None and name != subcommand:
            continue
        lines.append(f"{name}:")
        lines.extend(f"  {s.name:<24}{s.description}" for s in SUITES.values()
                     if s.subcommand == name)
    return lines


def _log_validation_error(exc: ValidationError) -> None:
    for err in exc.errors():
        location = ".".join(str(part) for part in err["loc"]) or "<root>"
        logger.error("Invalid config at %s: %s", location, err["msg"])


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Load the config and apply command-line overrides, re-validating the result."""
    config = load_config(args.config)
    data = config.model_dump()
    if args.seed is not None:
        data["noise"]["seed"] = args.seed
    if args.threads is not None:
        data["threads"] = args.threads
    if args.out is not None:
        data["output_dir"] = args.out
    return ExperimentConfig.model_validate(data)


def _failure_report(suite: str, exc: Exception) -> EstimateReport:
    return EstimateReport(
        inequality=f"{suite}: completed",
        passed=False,
        notes=[f"{type(exc).__name__}: {exc}"],
    )


def _log_summary(reports: Sequence[EstimateReport]) -> None:
    for r in reports:
        if r.passed:
            logger.info("PASS %s (sup=%.4g, drift=%s)", r.inequality, r.supremum, r.drift)
        else:
            logger.error(
                "FAIL %s (sup=%.4g, refined=%s, drift=%s, threshold=%g) %s",
                r.inequality, r.supremum, r.refined_supremum, r.drift, r.threshold,
                "; ".join(r.notes),
            )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
    )

    if args.list_suites:
        print("\n".join(list_suites(args.subcommand)))
        return EXIT_PASSED
    if args.subcommand is None:
        parser.error("a subcommand is required unless --list-suites is given")

    try:
        config = _resolve_config(args)
    except ValidationError as exc:
        _log_validation_error(exc)
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError, yaml.YAMLError) as exc:
        logger.error("Invalid config: %s", exc)
        return EXIT_CONFIG

    set_default_threads(config.threads)
    selected = suites_for(args.subcommand, config.suites)
    if not selected:
        logger.error("No suites of %s are selected by the config", args.subcommand)
        return EXIT_CONFIG
    digest = config_hash(config)
    seed = config.noise.seed
    logger.info(
        "Running %s: %d suite(s), config hash %s, seed %d",
        args.subcommand, len(selected), digest[:12], seed,
    )

    ctx = RunContext(config)
    reports: list[EstimateReport] = []
    for suite in selected:
        logger.info("Suite %s: %s", suite.name, suite.description)
        try:
            reports.extend(suite.runner(ctx))
        except ParameterWindowError as exc:
            logger.error("Parameter window violated: %s", exc.inequality)
            logger.error("%s", exc)
            return EXIT_WINDOW
        except (DivergentInversionError, QuadratureError, PicardDivergenceError) as exc:
            logger.error("Suite %s failed: %s", suite.name, exc)
            reports.append(_failure_report(suite.name, exc))
        except ValueError as exc:
            logger.error("Suite %s cannot run with this config: %s", suite.name, exc)
            return EXIT_CONFIG

    out_dir = Path(config.output_dir) / args.subcommand
    artifacts = [
        write_csv(out_dir / a.name, a.columns, a.rows, config_hash=digest, seed=seed)
        for a in ctx.artifacts
    ]
    artifacts.append(
        write_report_samples(out_dir / "reports.csv", reports, config_hash=digest, seed=seed)
    )
    manifest = write_manifest(
        out_dir / "manifest.json",
        subcommand=args.subcommand,
        config=config.model_dump(mode="json"),
        config_hash=digest,
        seed=seed,
        reports=reports,
        artifacts=artifacts,
    )
    _log_summary(reports)
    passed = all(r.passed for r in reports)
    logger.info("%s: %d/%d checks passed, manifest %s", args.subcommand,
                sum(r.passed for r in reports), len(reports), manifest)
    return EXIT_PASSED if passed else EXIT_FAILED


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
