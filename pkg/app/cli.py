"""
命令行入口

    chemosim simulate --config <path> [--out <dir>]
    chemosim sweep    --config <path> --masses <m1,m2,...> [--out <dir>] [--workers k]
    chemosim validate --csv <path>
    chemosim report   --run <dir>

退出码: 0 成功, 1 CSV 校验失败, 2 配置错误, 3 数值发散, 4 刚性坍缩 (仍产生报告)
"""
import argparse
import asyncio
import logging
import sys
from typing import List, Optional

from app.core.config import settings
from app.core.exceptions import ConfigError, ContractViolation, ResolutionError
from app.services.config_loader import load_config, load_sweep_spec
from app.services.simulation_service import SimulationService, rerun_report, validate_csv
from app.services.sweep_service import SweepService

logger = logging.getLogger("chemosim")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CONFIG = 2


def _parse_masses(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"--masses expects a comma list of numbers: {e}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chemosim", description="Radial chemotaxis grow-up simulator")
    parser.add_argument("--log-level", default=None, help="overrides LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configuration")
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--out", default=None, help="output directory (overrides output.directory)")

    p = sub.add_parser("sweep", help="run a mass sweep in multiples of 8*pi")
    p.add_argument("--config", required=True, help="INI base configuration")
    p.add_argument("--masses", required=True, type=_parse_masses, help="comma list of 8*pi multiples")
    p.add_argument("--out", default=None, help="shared output root")
    p.add_argument("--workers", type=int, default=None, help="concurrent runs")

    p = sub.add_parser("validate", help="check a series CSV")
    p.add_argument("--csv", required=True)

    p = sub.add_parser("report", help="rebuild the report of a stored run")
    p.add_argument("--run", required=True)
    return parser


def _simulate(args) -> int:
    config = load_config(args.config)
    outcome = SimulationService(config, output_dir=args.out).run()
    report = outcome.report
    print(f"{outcome.directory}: {report.termination_reason.value}, growth={report.growth_verdict.value}, "
          f"F_trend={report.f_trend.verdict.value}")
    return outcome.exit_code


def _sweep(args) -> int:
    spec = load_sweep_spec(args.config, args.masses, output_root=args.out)
    rows = asyncio.run(SweepService(workers=args.workers).sweep(spec))
    for row in rows:
        print(f"{row.multiplier:g}x8pi: {row.status} {row.growth_verdict or ''}")
    return EXIT_OK


def _validate(args) -> int:
    outcome = validate_csv(args.csv)
    for problem in outcome.problems:
        print(problem)
    print(f"{outcome.path}: {'valid' if outcome.valid else 'invalid'} ({outcome.rows} rows)")
    return EXIT_OK if outcome.valid else EXIT_INVALID


def _report(args) -> int:
    report = rerun_report(args.run)
    print(report.model_dump_json(indent=2))
    return EXIT_OK


COMMANDS = {
    "simulate": _simulate,
    "sweep": _sweep,
    "validate": _validate,
    "report": _report,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ResolutionError) as e:
        logger.error(e.message)
        return EXIT_CONFIG
    except ContractViolation as e:
        logger.error(e.message)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
