#!/usr/bin/env python3
"""
czforge command-line entry point

    czforge <scenario> [--config PATH] [--out DIR] [--dt NS] [--force]

Exit codes: 0 success, 1 simulation failure, 2 unconverged optimization,
3 configuration error.
"""
import argparse
import logging
import sys
from pathlib import Path

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))

from core import __version__
from core.config import Config, setup_logging
from core.errors import ConfigError, CZForgeError
from experiments.persistence import ResultWriter
from experiments.scenarios import SCENARIO_RUNNERS, expected_outputs, persist, run_scenario
from experiments.settings import ExperimentConfig, config_hash, load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_UNCONVERGED = 2
EXIT_CONFIG = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="czforge", description="Fast CZ gate simulation and pulse optimization")
    parser.add_argument("scenario", choices=sorted(SCENARIO_RUNNERS), help="scenario to run")
    parser.add_argument("--config", help="experiment config JSON (defaults to the built-in reference device)")
    parser.add_argument("--out", help="output directory (default: run.output_dir or CZFORGE_OUTPUT_DIR)")
    parser.add_argument("--dt", type=float, help="integration step in ns, overrides run.dt")
    parser.add_argument("--force", action="store_true", help="overwrite results written from a different config")
    parser.add_argument("--log-level", help="overrides CZFORGE_LOG_LEVEL")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {'scenario__name': args.scenario}
    if args.dt is not None:
        overrides['run__dt'] = args.dt
    return cfg.with_overrides(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    if not Config.validate():
        logger.error("Environment configuration is invalid")
        return EXIT_CONFIG

    try:
        cfg = resolve_config(args)
        out_dir = Config.ensure_directories(args.out or cfg.run.output_dir)
        writer = ResultWriter(out_dir, config_hash(cfg), cfg.run.dt, force=args.force)
        writer.check(expected_outputs(args.scenario))

        outcome = run_scenario(args.scenario, cfg)
        paths = persist(outcome, writer)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except CZForgeError as e:
        logger.error(f"Simulation failed: {e}")
        return EXIT_FAILURE

    print(f"czforge {args.scenario}: wrote {len(paths)} files to {out_dir}")
    if outcome.report is not None:
        report = outcome.report
        print(f"   t_hold={report.t_hold:.3f} ns  t_gate={report.t_gate:.3f} ns  "
              f"1-F={report.infidelity:.3e}  leak={report.eps_leak:.3e}  swap={report.eps_swap:.3e}")

    if not outcome.converged:
        logger.warning("Optimization did not converge; partial results were written")
        return EXIT_UNCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
