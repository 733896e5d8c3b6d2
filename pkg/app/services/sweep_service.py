"""
质量扫描服务

每个质量倍数是一次独立运行, 各自写入自己的目录; 运行可在进程池或线程池中并发执行。
单个运行失败只记录在对应的汇总行中, 扫描继续。
"""
import asyncio
import logging
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ConfigError, SimulationError
from app.models.report import SweepRow
from app.models.run_config import EIGHT_PI, RunConfig, SweepSpec
from app.repositories.run_repository import write_sweep_summary
from app.services.config_loader import format_validation_error
from app.services.simulation_service import SimulationService, resolve_output_dir

logger = logging.getLogger(__name__)

SUMMARY_NAME = "summary.csv"


def run_directory_name(multiplier: float) -> str:
    return f"mass_{multiplier:g}x8pi"


def config_for_multiplier(base: RunConfig, multiplier: float, directory: Path) -> RunConfig:
    return base.model_copy(update={
        "init": base.init.model_copy(update={"total_mass": multiplier * EIGHT_PI}),
        "output": base.output.model_copy(update={"directory": str(directory)}),
    })


def run_single(config_json: str, multiplier: float) -> SweepRow:
    """执行一次扫描运行 (进程池入口, 参数需可 pickle)"""
    mass = multiplier * EIGHT_PI
    directory = ""
    try:
        try:
            config = RunConfig.model_validate_json(config_json)
        except ValidationError as e:
            raise ConfigError(format_validation_error(e)) from e
        directory = config.output.directory
        outcome = SimulationService(config, output_dir=directory).run()
    except SimulationError as e:
        logger.warning(f"Sweep run {multiplier:g}x8pi failed: {e.message}")
        return SweepRow(multiplier=multiplier, mass=mass, directory=directory,
                        status=e.reason, error=e.message)
    report = outcome.report
    return SweepRow(
        multiplier=multiplier,
        mass=mass,
        directory=directory,
        status="ok",
        termination_reason=report.termination_reason.value,
        growth_verdict=report.growth_verdict.value,
        f_trend=report.f_trend.verdict.value,
        delta_weight=report.delta_weight.delta_weight if report.delta_weight else None,
        eps_reg_threshold=report.eps_reg_threshold,
        eps_reg_attained=report.eps_reg_attained,
        eightpi_attained=report.eightpi.attained if report.eightpi else None,
    )


class SweepService:
    """按质量倍数并发执行运行并汇总"""

    def __init__(self, workers: Optional[int] = None, executor_kind: Optional[str] = None):
        self.workers = max(1, workers or settings.sweep_workers)
        self.executor_kind = executor_kind or settings.sweep_executor

    def _executor(self) -> Executor:
        if self.executor_kind == "thread":
            return ThreadPoolExecutor(max_workers=self.workers)
        return ProcessPoolExecutor(max_workers=self.workers)

    async def sweep(self, spec: SweepSpec) -> List[SweepRow]:
        """
        执行扫描并写出 summary.csv

        Returns:
            按质量排序的汇总行, 行数等于倍数个数
        """
        root = resolve_output_dir(spec.output_root).resolve()
        root.mkdir(parents=True, exist_ok=True)
        jobs = []
        for m in spec.mass_multipliers:
            cfg = config_for_multiplier(spec.base, m, root / run_directory_name(m))
            jobs.append((m, cfg))

        logger.info(f"Sweep of {len(jobs)} runs with {self.workers} {self.executor_kind} workers -> {root}")
        rows: List[SweepRow] = []
        if jobs:
            loop = asyncio.get_running_loop()
            with self._executor() as pool:
                futures = [
                    loop.run_in_executor(pool, run_single, cfg.model_dump_json(), m)
                    for m, cfg in jobs
                ]
                results = await asyncio.gather(*futures, return_exceptions=True)
            for (m, cfg), result in zip(jobs, results):
                if isinstance(result, BaseException):
                    logger.error(f"Sweep run {m:g}x8pi raised {type(result).__name__}: {result}")
                    result = SweepRow(
                        multiplier=m, mass=cfg.init.total_mass, directory=cfg.output.directory,
                        status="error", error=f"{type(result).__name__}: {result}",
                    )
                rows.append(result)

        rows.sort(key=lambda r: r.mass)
        write_sweep_summary(root / SUMMARY_NAME, rows)
        logger.info(f"Sweep summary written to {root / SUMMARY_NAME}")
        return rows
