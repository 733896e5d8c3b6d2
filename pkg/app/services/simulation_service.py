"""
运行编排: 构造网格与截断族, 推进求解器, 采样与快照, 诊断与报告

同一配置的两次运行产生逐字节相同的 CSV 与报告。
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from app.core.config import settings
from app.core.exceptions import ContractViolation, NumericalError, StiffnessError
from app.models.fields import Cutoff, FieldState, RadialGrid, SobolevConstant
from app.models.report import (
    FieldChecks,
    RunMeta,
    RunReport,
    TerminationReason,
    ValidationOutcome,
)
from app.models.run_config import RunConfig
from app.models.samples import (
    BALL_COLUMN,
    CUTOFF_COLUMNS,
    FunctionalSample,
    csv_header,
    format_radius,
    radii_from_header,
)
from app.repositories.run_repository import RunRepository, read_series_csv
from app.services.config_loader import config_hash
from app.services.cutoff import build_cutoff_family
from app.services.diagnostic_service import DiagnosticService
from app.services.functionals import (
    FunctionalEvaluator,
    estimate_K_sob,
    localized_identity_defect,
    lyapunov_identity_residual,
    sobolev_check_i,
    young_terms,
)
from app.services.initial_data import init_fields
from app.services.radial_grid import build_grid
from app.services.solver import StiffnessMonitor, adaptive_dt, step

logger = logging.getLogger(__name__)

EXIT_CODES = {
    TerminationReason.COMPLETED: 0,
    TerminationReason.STEP_BUDGET: 0,
    TerminationReason.DIVERGENCE: 3,
    TerminationReason.POSITIVITY: 3,
    TerminationReason.STIFFNESS: 4,
}
# 判定到达 t_end 的相对容差
TIME_EPS = 1e-12
INEQUALITY_TOL = 1e-8


@dataclass
class RunOutcome:
    report: RunReport
    directory: Path

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.report.termination_reason]


def resolve_output_dir(directory: Union[str, Path]) -> Path:
    """相对路径加上 CHEMOSIM_OUTPUT_ROOT 前缀 (若设置)"""
    path = Path(directory)
    if path.is_absolute() or not settings.output_root:
        return path
    return Path(settings.output_root) / path


class FieldCheckTracker:
    """逐采样的不等式检查与单步恒等式缺陷"""

    def __init__(self, grid: RadialGrid, cutoffs: List[Cutoff], K: SobolevConstant, a: float):
        self.grid = grid
        self.cutoffs = cutoffs
        self.K = K
        self.a = a
        self.checks = FieldChecks()

    def observe(self, state: FieldState) -> None:
        checks = self.checks
        checks.samples_checked += 1
        for c in self.cutoffs:
            if np.all(state.u > 0):
                passed, slack = sobolev_check_i(self.grid, state.u, c, self.K)
                if checks.sobolev_min_slack is None or slack < checks.sobolev_min_slack:
                    checks.sobolev_min_slack = slack
                    checks.sobolev_worst_t = state.t
                checks.sobolev_passed = checks.sobolev_passed and passed
            lhs, rhs = young_terms(self.grid, state, c, self.a)
            ratio = (rhs - lhs) / (abs(lhs) + abs(rhs) + 1e-300)
            if checks.young_min_ratio is None or ratio < checks.young_min_ratio:
                checks.young_min_ratio = ratio
            checks.young_passed = checks.young_passed and ratio >= -INEQUALITY_TOL

    def identity(self, earlier: FunctionalSample, later: FunctionalSample) -> None:
        """相邻两步上的全局与局部化恒等式缺陷 (相对量)"""
        checks = self.checks
        ratio = lyapunov_identity_residual(earlier, later) / (abs(later.F) + later.D + 1.0)
        checks.max_step_lyapunov_ratio = max(ratio, checks.max_step_lyapunov_ratio or 0.0)
        dt = later.t - earlier.t
        for a, b in zip(earlier.cutoffs, later.cutoffs):
            key = format_radius(b.radius)
            local = localized_identity_defect(a, b, dt) / (abs(b.F_phi) + b.D_phi + 1.0)
            checks.max_step_localized_ratio[key] = max(local, checks.max_step_localized_ratio.get(key, 0.0))


class SimulationService:
    """执行一次运行并写出全部产物"""

    def __init__(self, config: RunConfig, output_dir: Optional[Union[str, Path]] = None):
        self.config = config
        directory = output_dir if output_dir is not None else config.output.directory
        self.directory = resolve_output_dir(directory)
        self.repo = RunRepository(self.directory, config.output.csv_name, config.output.report_name)
        self.config_hash = config_hash(config)

    def _setup(self):
        cfg = self.config
        grid = build_grid(cfg.domain.R, cfg.domain.N)
        cutoffs = build_cutoff_family(grid, cfg.cutoffs.radii, cfg.cutoffs.n)
        if not cutoffs:
            logger.warning("No resolvable cutoff radius; localized functionals are not sampled")
        K = estimate_K_sob(grid, cfg.diagnostics.sobolev_seed)
        return grid, cutoffs, K

    def run(self) -> RunOutcome:
        """
        推进到 t_end 或数值终止, 然后运行诊断

        Returns:
            RunOutcome (报告与输出目录); 数值终止也会产生报告
        """
        cfg = self.config
        grid, cutoffs, K = self._setup()
        state = init_fields(grid, cfg.init)
        evaluator = FunctionalEvaluator(grid, cutoffs, cfg.diagnostics.mt_exponent, cfg.diagnostics.pointwise_p)
        tracker = FieldCheckTracker(grid, cutoffs, K, cfg.diagnostics.mt_exponent)
        monitor = StiffnessMonitor(cfg.solver)

        self.repo.prepare()
        logger.info(
            f"Run start: R={grid.R} N={grid.N} mass={cfg.init.total_mass:.6g} "
            f"t_end={cfg.time.t_end} -> {self.directory}"
        )

        t_end = cfg.time.t_end
        stride = cfg.time.sample_stride
        pending_times = list(cfg.time.resolved_snapshot_times())
        snapshot_states: List[FieldState] = []
        snapshot_names: List[str] = []
        series: List[FunctionalSample] = []

        reason = TerminationReason.COMPLETED
        detail = None
        last_sample_state = state.copy()
        last_dt = 0.0

        def take_snapshots():
            while pending_times and state.t >= pending_times[0] - TIME_EPS * t_end:
                pending_times.pop(0)
                snapshot_names.append(self.repo.write_checkpoint(len(snapshot_names), state, grid, self.config_hash))
                snapshot_states.append(state.copy())

        with self.repo.open_series([c.r for c in cutoffs]) as writer:
            sample = evaluator.sample(state, 0.0)
            writer.write(sample)
            series.append(sample)
            tracker.observe(state)
            take_snapshots()
            previous = sample

            try:
                while t_end - state.t > TIME_EPS * t_end:
                    if state.step_count >= cfg.time.max_steps:
                        reason = TerminationReason.STEP_BUDGET
                        detail = f"step budget {cfg.time.max_steps} exhausted at t={state.t:.6g}"
                        logger.warning(detail)
                        break
                    dt = adaptive_dt(grid, state, cfg.solver)
                    monitor.observe(dt, state)
                    # 启动斜坡: 首步 dt_initial, 之后每步至多放大 dt_growth 倍
                    ramp = last_dt * cfg.solver.dt_growth if last_dt > 0 else cfg.solver.dt_initial
                    dt = min(dt, ramp, t_end - state.t)
                    step(state, grid, cfg.solver, dt)
                    last_dt = dt

                    current = None
                    if previous is not None:
                        current = evaluator.sample(state, dt)
                        tracker.identity(previous, current)
                        previous = None
                    if state.step_count % stride == 0:
                        sample = current or evaluator.sample(state, dt)
                        writer.write(sample)
                        series.append(sample)
                        tracker.observe(state)
                        last_sample_state = state.copy()
                        previous = sample
                        logger.debug(f"step {state.step_count} t={state.t:.6g} linf={sample.linf_u:.6g}")
                    take_snapshots()
            except NumericalError as e:
                reason = TerminationReason(e.reason)
                detail = e.message
                log = logger.warning if isinstance(e, StiffnessError) else logger.error
                log(f"Run terminated ({e.reason}): {e.message}")

            if not _finite(state):
                state = last_sample_state
            elif series[-1].t != state.t:
                sample = evaluator.sample(state, last_dt)
                writer.write(sample)
                series.append(sample)
                tracker.observe(state)

        if not snapshot_states or snapshot_states[-1].t != state.t:
            snapshot_names.append(self.repo.write_checkpoint(len(snapshot_names), state, grid, self.config_hash))
            snapshot_states.append(state.copy())

        report = DiagnosticService(cfg).build_report(
            grid, series, snapshot_states, state, cutoffs, K,
            termination_reason=reason,
            config_hash=self.config_hash,
            termination_detail=detail,
            field_checks=tracker.checks,
        )
        self.repo.write_report(report)
        self.repo.write_meta(RunMeta(
            config=cfg,
            config_hash=self.config_hash,
            termination_reason=reason,
            termination_detail=detail,
            step_count=state.step_count,
            t_final=state.t,
            snapshots=snapshot_names,
            field_checks=tracker.checks,
        ))
        logger.info(
            f"Run finished: {reason.value} at t={state.t:.6g} after {state.step_count} steps, "
            f"{len(series)} samples"
        )
        return RunOutcome(report=report, directory=self.directory)


def _finite(state: FieldState) -> bool:
    return all(np.all(np.isfinite(getattr(state, name))) for name in ("u", "v", "w"))


def rerun_report(run_dir: Union[str, Path]) -> RunReport:
    """由已存储的序列、快照与元数据重新运行诊断并覆盖报告"""
    probe = RunRepository(run_dir)
    meta = probe.read_meta()
    cfg = meta.config
    repo = RunRepository(run_dir, cfg.output.csv_name, cfg.output.report_name)

    grid = build_grid(cfg.domain.R, cfg.domain.N)
    cutoffs = build_cutoff_family(grid, cfg.cutoffs.radii, cfg.cutoffs.n)
    K = estimate_K_sob(grid, cfg.diagnostics.sobolev_seed)
    _, series = repo.read_series()
    snapshots = [repo.read_checkpoint(name)[1] for name in meta.snapshots]
    if not snapshots:
        raise ContractViolation(f"{run_dir} holds no snapshots to rebuild the report from")

    report = DiagnosticService(cfg).build_report(
        grid, series, snapshots, snapshots[-1], cutoffs, K,
        termination_reason=meta.termination_reason,
        config_hash=meta.config_hash,
        termination_detail=meta.termination_detail,
        field_checks=meta.field_checks,
    )
    repo.write_report(report)
    logger.info(f"Rebuilt report for {run_dir}")
    return report


def validate_csv(path: Union[str, Path]) -> ValidationOutcome:
    """检查表头与每行的 FunctionalSample 不变量"""
    path = Path(path)
    problems: List[str] = []
    try:
        radii, samples = read_series_csv(path)
    except (OSError, KeyError, ValueError) as e:
        return ValidationOutcome(path=str(path), valid=False, problems=[f"unreadable series: {e}"])

    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
    if header != csv_header(radii_from_header(header)):
        problems.append("header does not match the fixed column layout")

    last_t = -math.inf
    for k, s in enumerate(samples, start=1):
        values = [s.t, s.dt, s.mass_u, s.mass_v, s.mass_w, s.linf_u, s.argmax_radius,
                  s.entropy, s.F, s.D, s.wt_l2, s.w_monitor, *s.ball_masses]
        values += [getattr(b, name) for b in s.cutoffs for name in CUTOFF_COLUMNS]
        if not all(math.isfinite(v) for v in values):
            problems.append(f"row {k}: non-finite value")
            continue
        if s.t < last_t:
            problems.append(f"row {k}: time decreases")
        last_t = s.t
        if s.dt < 0:
            problems.append(f"row {k}: negative dt")
        if s.D < 0:
            problems.append(f"row {k}: D < 0")
        bound = s.mass_u * (1.0 + 1e-10) + 1e-300
        for b in s.cutoffs:
            if b.D_phi < 0:
                problems.append(f"row {k}: D_phi@{format_radius(b.radius)} < 0")
            if not 0.0 <= b.M_phi <= bound:
                problems.append(f"row {k}: M_phi@{format_radius(b.radius)} outside [0, mass_u]")
        for r, m in zip(radii, s.ball_masses):
            if not 0.0 <= m <= bound:
                problems.append(f"row {k}: {BALL_COLUMN}@{format_radius(r)} outside [0, mass_u]")

    outcome = ValidationOutcome(path=str(path), valid=not problems, rows=len(samples), problems=problems)
    level = logging.INFO if outcome.valid else logging.WARNING
    logger.log(level, f"Validated {path}: {len(samples)} rows, {len(problems)} problems")
    return outcome
