"""
诊断服务 - 把时间序列与快照转换为关于长时间行为的判定

所有 "t → ∞ 的上极限" 都以后期窗口 (运行时长的最后 window_fraction) 上的最大值代替;
子序列 t_k 以几何间隔的快照代替。
"""
import logging
import math
from itertools import combinations
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from app.core.exceptions import ContractViolation
from app.models.fields import Cutoff, FieldState, RadialGrid, SobolevConstant
from app.models.report import (
    ConcentrationPoint,
    CorollaryBranch,
    CutoffRecord,
    DeltaWeight,
    EightPiCheck,
    EpsRegularity,
    FieldChecks,
    FTrend,
    FTrendVerdict,
    GrowthVerdict,
    GrowupLocus,
    IdentityChecks,
    MassIdentities,
    RunReport,
    SobolevRecord,
    StationaryResiduals,
    TerminationReason,
    Theorem3Verdict,
    WeakLimitDefect,
)
from app.models.run_config import EIGHT_PI, RunConfig
from app.models.samples import FunctionalSample, format_radius
from app.services.cutoff import build_cutoff_family
from app.services.functionals import (
    localized_identity_defect,
    lyapunov_identity_residual,
    log_drift_density,
    mass_phi,
)
from app.services.radial_grid import annulus_mask, integrate, integrate_faces
from app.services.solver import compute_w_t, laplacian_radial

logger = logging.getLogger(__name__)

MIN_SERIES = 100
MIN_DELTA_WINDOW = 10
MIN_LOCUS_SNAPSHOTS = 3
GROWTH_FACTOR = 10.0
BOUNDED_BAND = 1.2
F_PLATEAU = 0.01
F_DROP_IQR = 10.0
FULL_CONCENTRATION = 0.8
CONCENTRATING_VERDICTS = (GrowthVerdict.GROWING, GrowthVerdict.NUMERICALLY_COLLAPSED)


def _t_statistic(x: np.ndarray, y: np.ndarray):
    """线性回归斜率及其 t 统计量; 残差为零时斜率非零记为 ±inf"""
    fit = linregress(x, y)
    slope = float(fit.slope)
    if fit.stderr > 0:
        return slope, slope / float(fit.stderr), fit
    if slope == 0.0:
        return slope, 0.0, fit
    return slope, math.copysign(math.inf, slope), fit


def late_window(series: Sequence[FunctionalSample], window_fraction: float) -> List[FunctionalSample]:
    """t ≥ (1 − window_fraction)·t_final 的采样"""
    if not series:
        return []
    t_start = (1.0 - window_fraction) * series[-1].t
    return [s for s in series if s.t >= t_start]


def classify_growth(series: Sequence[FunctionalSample], horizon_fraction: float,
                    collapsed: bool = False, tstat_threshold: float = 5.0) -> GrowthVerdict:
    """
    依据 ‖u‖_∞ 序列判定增长类型

    只依赖采样值及其顺序, 对时间重新编号不变。

    Args:
        series: 时间序列
        horizon_fraction: 后期窗口占比
        collapsed: 运行是否因刚性而终止

    Raises:
        ContractViolation: 采样少于 100 个
    """
    n = len(series)
    if n < MIN_SERIES:
        raise ContractViolation(f"classify_growth needs at least {MIN_SERIES} samples, got {n}")
    if collapsed:
        return GrowthVerdict.NUMERICALLY_COLLAPSED

    linf = np.array([s.linf_u for s in series], dtype=np.float64)
    tail_start = min(int(n * (1.0 - horizon_fraction)), n - 3)
    tail = linf[tail_start:]
    if tail[-1] > GROWTH_FACTOR * linf[n // 4] and np.all(tail > 0):
        slope, tstat, _ = _t_statistic(np.arange(tail.size, dtype=np.float64), np.log(tail))
        if slope > 0 and tstat > tstat_threshold:
            return GrowthVerdict.GROWING

    half = linf[n // 2:]
    running = np.array([np.median(half[:k + 1]) for k in range(half.size)])
    if np.all(half <= BOUNDED_BAND * running) and np.all(half * BOUNDED_BAND >= running):
        return GrowthVerdict.BOUNDED
    return GrowthVerdict.INCONCLUSIVE


def growup_locus(grid: RadialGrid, fields: Sequence[np.ndarray], source: str = "snapshots") -> GrowupLocus:
    """后期各场 u 的 argmax 半径的最大值; 不超过 2Δr 时与原点集中一致"""
    if len(fields) < MIN_LOCUS_SNAPSHOTS:
        raise ContractViolation(
            f"growup_locus needs at least {MIN_LOCUS_SNAPSHOTS} late snapshots, got {len(fields)}"
        )
    radius = max(float(grid.cell_centers[int(np.argmax(u))]) for u in fields)
    return GrowupLocus(radius=radius, consistent=radius <= 2.0 * grid.dr, source=source, count=len(fields))


def concentration_profile(grid: RadialGrid, u, radii: Sequence[float], n: int) -> List[ConcentrationPoint]:
    """各截断半径上的 M_φ, 按 r 递增排列"""
    family = build_cutoff_family(grid, radii, n)
    points = [ConcentrationPoint(r=c.r, m=mass_phi(grid, u, c)) for c in family]
    return sorted(points, key=lambda p: p.r)


def cauchy_distance(grid: RadialGrid, fields: Sequence[np.ndarray], r_min: float) -> Optional[float]:
    """|x| > r_min 上两两快照差的最大 L∞ 距离"""
    if len(fields) < 2:
        return None
    mask = grid.cell_centers > r_min
    return max(float(np.max(np.abs(a[mask] - b[mask]))) for a, b in combinations(fields, 2))


def delta_weight_estimate(window: Sequence[FunctionalSample], final_mass: float,
                          cauchy: Optional[float] = None) -> DeltaWeight:
    """
    m̂(r_j) = 窗口内 M_φ(r_j) 的最大值; m̂ = m̂(r_min)

    Raises:
        ContractViolation: 窗口少于 10 个采样
    """
    if len(window) < MIN_DELTA_WINDOW:
        raise ContractViolation(
            f"delta_weight_estimate needs at least {MIN_DELTA_WINDOW} late samples, got {len(window)}"
        )
    radii = sorted(block.radius for block in window[0].cutoffs)
    if not radii:
        raise ContractViolation("samples carry no cutoff blocks")
    curve = [
        ConcentrationPoint(r=r, m=max(s.cutoff(r).M_phi for s in window))
        for r in radii
    ]
    m_hat = curve[0].m
    monotone = all(a.m <= b.m * (1.0 + 1e-12) + 1e-300 for a, b in zip(curve, curve[1:]))
    return DeltaWeight(
        curve=curve,
        delta_weight=m_hat,
        remainder_mass=final_mass - m_hat,
        cauchy_distance=cauchy,
        window_size=len(window),
        monotone=monotone,
    )


def eps_threshold(K: SobolevConstant) -> float:
    return 1.0 / (200.0 * K.K_sob ** 2)


def _require_concentrating(verdict: GrowthVerdict, name: str) -> None:
    if verdict not in CONCENTRATING_VERDICTS:
        raise ContractViolation(f"{name} applies only to growing or collapsed runs, verdict is {verdict.value}")


def eps_regularity(window: Sequence[FunctionalSample], K: SobolevConstant, radius: float,
                   verdict: GrowthVerdict) -> EpsRegularity:
    """后期窗口内 ∫_{B_r}u 的最大值是否达到 1/(200K²)"""
    _require_concentrating(verdict, "eps_regularity")
    radii = [block.radius for block in window[0].cutoffs]
    index = radii.index(radius)
    late_max = max(s.ball_masses[index] for s in window)
    return EpsRegularity(radius=radius, late_max_ball_mass=late_max, attained=late_max >= eps_threshold(K))


def eightpi_check(window: Sequence[FunctionalSample], verdict: GrowthVerdict, tol: float) -> EightPiCheck:
    """最小截断半径上 M_φ 的后期最大值 ≥ 8π(1 − tol)"""
    _require_concentrating(verdict, "eightpi_check")
    r_min = min(block.radius for block in window[0].cutoffs)
    late_max = max(s.cutoff(r_min).M_phi for s in window)
    return EightPiCheck(radius=r_min, late_max_M_phi=late_max, attained=late_max >= EIGHT_PI * (1.0 - tol))


def f_trend(series: Sequence[FunctionalSample], tstat_threshold: float = 5.0) -> FTrend:
    """
    F 的长期趋势

    先检查后半段是否处于 1% 平台 (bounded_below), 再用后半段 F 对 log t 的回归
    与前半段去趋势残差的四分位距判定 decreasing_unbounded。
    """
    positive = [s for s in series if s.t > 0]
    if len(series) < MIN_SERIES or len(positive) < 4:
        logger.warning(f"F trend needs at least {MIN_SERIES} samples, got {len(series)}")
        return FTrend(verdict=FTrendVerdict.INCONCLUSIVE)

    t = np.array([s.t for s in positive], dtype=np.float64)
    F = np.array([s.F for s in positive], dtype=np.float64)
    half = t.size // 2
    log_t = np.log(t)

    slope, tstat, _ = _t_statistic(log_t[half:], F[half:])
    _, _, early_fit = _t_statistic(log_t[:half], F[:half])
    residuals = F[:half] - (early_fit.intercept + early_fit.slope * log_t[:half])
    q75, q25 = np.percentile(residuals, [75, 25])
    iqr = float(q75 - q25)
    drop = float(F[0] - F[-1])

    scale = max(abs(F[-1]), 1.0)
    if np.all(np.abs(F[half:] - F[-1]) <= F_PLATEAU * scale):
        verdict = FTrendVerdict.BOUNDED_BELOW
    elif slope < 0 and abs(tstat) > tstat_threshold and drop > F_DROP_IQR * iqr:
        verdict = FTrendVerdict.DECREASING_UNBOUNDED
    else:
        verdict = FTrendVerdict.INCONCLUSIVE
    return FTrend(
        verdict=verdict,
        slope=slope,
        t_stat=tstat if math.isfinite(tstat) else math.copysign(1e300, tstat),
        drop=drop,
        first_half_iqr=iqr,
    )


def stationary_residuals(grid: RadialGrid, state: FieldState, rho_cut: float) -> StationaryResiduals:
    """
    环域 |x| > rho_cut 上稳态系统的残差

    (max|u − v|, ‖−Δw + w − u‖₂, (∫u|∇(log u − w)|²)^{1/2}, ‖w_t‖₂²)
    """
    if rho_cut < 4.0 * grid.dr:
        raise ContractViolation(f"rho_cut={rho_cut} must be at least 4*dr={4.0 * grid.dr:.6g}")
    mask = annulus_mask(grid, rho_cut)
    areas = grid.cell_areas[mask]
    u, v, w = state.u, state.v, state.w

    res1 = float(np.max(np.abs(u[mask] - v[mask]))) if mask.any() else 0.0
    elliptic = -laplacian_radial(grid, w) + w - u
    res2 = math.sqrt(float(np.dot(elliptic[mask] ** 2, areas)))

    face_mask = np.zeros(grid.N + 1, dtype=bool)
    face_mask[1:-1] = mask[:-1] & mask[1:]
    drift = log_drift_density(grid, u, w)
    res3 = math.sqrt(integrate_faces(grid, np.where(face_mask, drift, 0.0)))

    wt = compute_w_t(grid, state)
    wt_l2 = float(np.dot(wt[mask] ** 2, areas))
    return StationaryResiduals(rho_cut=rho_cut, u_minus_v_inf=res1, elliptic_l2=res2, drift_norm=res3, wt_l2=wt_l2)


def mass_identities(grid: RadialGrid, state: FieldState, u0_mass: float, rho_cut: float,
                    tol: float = 0.05) -> MassIdentities:
    """|∫w − ‖u₀‖₁| 与环域质量界 ∫_{|x|>ρ}u ≤ ‖u₀‖₁ − 8π + tol·‖u₀‖₁"""
    w_gap = abs(integrate(grid, state.w) - u0_mass)
    mask = annulus_mask(grid, rho_cut)
    annulus = float(np.dot(state.u[mask], grid.cell_areas[mask]))
    return MassIdentities(
        w_gap=w_gap,
        annulus_mass=annulus,
        u_inf_bound_ok=annulus <= u0_mass - EIGHT_PI + tol * u0_mass,
    )


def theorem3_verdict(growth: GrowthVerdict, trend: FTrend, identities: Optional[MassIdentities],
                     u0_mass: float, tol: float) -> Theorem3Verdict:
    """
    F 有下界时的一致性判定

    有界运行: ∫w 收敛到 ‖u₀‖₁ 即一致; 集中运行: 还要求环域质量趋于 0 (全质量集中)。
    """
    if trend.verdict != FTrendVerdict.BOUNDED_BELOW or identities is None:
        return Theorem3Verdict.NOT_APPLICABLE
    w_ok = identities.w_gap <= tol * u0_mass
    if growth == GrowthVerdict.BOUNDED:
        return Theorem3Verdict.CONSISTENT if w_ok else Theorem3Verdict.INCONSISTENT
    if growth in CONCENTRATING_VERDICTS:
        full = identities.annulus_mass <= tol * u0_mass
        return Theorem3Verdict.CONSISTENT if (w_ok and full) else Theorem3Verdict.INCONSISTENT
    return Theorem3Verdict.NOT_APPLICABLE


def corollary_branch(growth: GrowthVerdict, trend: FTrend, delta: Optional[DeltaWeight],
                     u0_mass: float) -> CorollaryBranch:
    """超临界集中运行落在哪个分支: 全质量集中或 F 无下界"""
    if u0_mass <= EIGHT_PI or growth not in CONCENTRATING_VERDICTS:
        return CorollaryBranch.NOT_APPLICABLE
    if delta is not None and delta.delta_weight >= FULL_CONCENTRATION * u0_mass:
        return CorollaryBranch.FULL_CONCENTRATION
    if trend.verdict == FTrendVerdict.DECREASING_UNBOUNDED:
        return CorollaryBranch.LYAPUNOV_UNBOUNDED
    return CorollaryBranch.UNDETERMINED


def weak_limit_defects(grid: RadialGrid, u, cutoff: Cutoff, m_hat: float) -> List[WeakLimitDefect]:
    """对 ξ ∈ {1, 1−φ_r, r²} 比较 ∫uξ 与 m̂ξ(0) + ∫fξ, f 为 |x| > r 上的 u"""
    u = np.asarray(u, dtype=np.float64)
    r = grid.cell_centers
    f = np.where(r > cutoff.r, u, 0.0)
    tests = (
        ("one", np.ones(grid.N), 1.0),
        ("one_minus_phi", 1.0 - cutoff.phi, 0.0),
        ("r_squared", r ** 2, 0.0),
    )
    defects = []
    for name, xi, xi0 in tests:
        observed = integrate(grid, u * xi)
        predicted = m_hat * xi0 + integrate(grid, f * xi)
        defects.append(WeakLimitDefect(
            test_function=name, observed=observed, predicted=predicted, defect=observed - predicted,
        ))
    return defects


def identity_checks(series: Sequence[FunctionalSample]) -> IdentityChecks:
    """由存储序列计算的恒等式与界的簿记"""
    checks = IdentityChecks()
    if not series:
        return checks
    first = series[0]
    u0, v0, w0 = first.mass_u, first.mass_v, first.mass_w

    ratios = []
    excess = 0.0
    for a, b in zip(series, series[1:]):
        if b.t > a.t:
            ratios.append(lyapunov_identity_residual(a, b) / (abs(b.F) + b.D + 1.0))
            for ca, cb in zip(a.cutoffs, b.cutoffs):
                key = format_radius(cb.radius)
                local = localized_identity_defect(ca, cb, b.t - a.t) / (abs(cb.F_phi) + cb.D_phi + 1.0)
                checks.max_localized_ratio[key] = max(local, checks.max_localized_ratio.get(key, 0.0))
        excess = max(excess, b.F - a.F)
    checks.max_lyapunov_ratio = max(ratios) if ratios else None
    checks.f_monotonicity_excess = excess

    gaps = [block.jensen_gap for s in series for block in s.cutoffs]
    checks.min_jensen_gap = min(gaps) if gaps else None
    for block in first.cutoffs:
        values = [s.cutoff(block.radius).mt_ratio for s in series]
        checks.mt_ratio_range[format_radius(block.radius)] = max(values) - min(values)
    checks.w_monitor_sup = max(s.w_monitor for s in series)

    checks.l1_bound_excess_v = max(s.mass_v for s in series) - max(u0, v0)
    checks.l1_bound_excess_w = max(s.mass_w for s in series) - max(u0, v0, w0)
    scale = max(u0, v0, 1e-300)
    checks.v_law_defect = max(
        abs(s.mass_v - (math.exp(-s.t) * v0 - math.expm1(-s.t) * u0)) / scale for s in series
    )
    return checks


class DiagnosticService:
    """把一次运行的序列、快照与最终状态汇总为 RunReport"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.diag = config.diagnostics

    def build_report(
        self,
        grid: RadialGrid,
        series: Sequence[FunctionalSample],
        snapshots: Sequence[FieldState],
        final_state: FieldState,
        cutoffs: Sequence[Cutoff],
        K: SobolevConstant,
        termination_reason: TerminationReason,
        config_hash: str,
        termination_detail: Optional[str] = None,
        field_checks: Optional[FieldChecks] = None,
    ) -> RunReport:
        """
        运行诊断并组装报告

        Args:
            grid: 径向网格
            series: 全部采样 (按时间排序)
            snapshots: 快照状态 (按时间排序, 含最终状态)
            final_state: 最终离散解
            cutoffs: 已校验的截断族
            K: Sobolev 常数估计
            termination_reason: 终止原因
            config_hash: 配置哈希
            field_checks: 运行中逐采样检查的结果

        Returns:
            RunReport
        """
        diag = self.diag
        notes = [
            "grow-up locus on a radial grid checks origin-peak persistence only; "
            "off-axis grow-up is not representable",
        ]
        collapsed = termination_reason == TerminationReason.STIFFNESS
        u0_mass = series[0].mass_u if series else integrate(grid, final_state.u)
        window = late_window(series, diag.window_fraction)

        try:
            growth = classify_growth(series, diag.window_fraction, collapsed=collapsed,
                                     tstat_threshold=diag.trend_tstat)
        except ContractViolation as e:
            growth = GrowthVerdict.NUMERICALLY_COLLAPSED if collapsed else GrowthVerdict.INCONCLUSIVE
            notes.append(f"growth classification: {e.message}")

        t_last = final_state.t
        decade = [s for s in snapshots if s.t >= t_last / 10.0]
        locus = None
        try:
            locus = growup_locus(grid, [s.u for s in decade])
        except ContractViolation:
            radii_series = [s for s in series if s.t >= t_last / 10.0]
            if len(radii_series) >= MIN_LOCUS_SNAPSHOTS:
                radius = max(s.argmax_radius for s in radii_series)
                locus = GrowupLocus(radius=radius, consistent=radius <= 2.0 * grid.dr,
                                    source="series", count=len(radii_series))
            else:
                notes.append("growup locus: fewer than 3 samples in the final decade")

        trend = f_trend(series, diag.trend_tstat)

        delta = None
        r_min = min((c.r for c in cutoffs), default=None)
        if r_min is not None:
            try:
                delta = delta_weight_estimate(
                    window,
                    integrate(grid, final_state.u),
                    cauchy=cauchy_distance(grid, [s.u for s in decade], r_min),
                )
            except ContractViolation as e:
                logger.warning(f"Delta weight not estimated: {e.message}")
                notes.append(f"delta weight: {e.message}")

        threshold = eps_threshold(K)
        eps_records: List[EpsRegularity] = []
        eightpi = None
        if growth in CONCENTRATING_VERDICTS and window and cutoffs:
            eps_records = [eps_regularity(window, K, c.r, growth) for c in cutoffs]
            eightpi = eightpi_check(window, growth, diag.eightpi_tol)

        residuals = None
        try:
            residuals = stationary_residuals(grid, final_state, diag.rho_cut)
        except ContractViolation as e:
            notes.append(f"stationary residuals: {e.message}")

        identities = None
        if trend.verdict == FTrendVerdict.BOUNDED_BELOW:
            identities = mass_identities(grid, final_state, u0_mass, diag.rho_cut, diag.mass_tol)

        defects: List[WeakLimitDefect] = []
        if delta is not None:
            smallest = min(cutoffs, key=lambda c: c.r)
            defects = weak_limit_defects(grid, final_state.u, smallest, delta.delta_weight)

        checks = identity_checks(series)

        report = RunReport(
            config_hash=config_hash,
            termination_reason=termination_reason,
            termination_detail=termination_detail,
            t_final=final_state.t,
            step_count=final_state.step_count,
            sample_count=len(series),
            R=grid.R,
            N=grid.N,
            dr=grid.dr,
            u0_mass=u0_mass,
            cutoffs=[_cutoff_record(c) for c in cutoffs],
            sobolev=SobolevRecord(
                K_sob=K.K_sob,
                family_size=K.family_size,
                max_ratio_witness=K.max_ratio_witness,
                max_ratio=K.max_ratio,
            ),
            growth_verdict=growth,
            growup_locus=locus,
            f_trend=trend,
            delta_weight=delta,
            eps_reg_threshold=threshold,
            eps_regularity=eps_records,
            eps_reg_attained=any(e.attained for e in eps_records) if eps_records else None,
            eightpi=eightpi,
            stationary_residuals=residuals,
            mass_identities=identities,
            theorem3_verdict=theorem3_verdict(growth, trend, identities, u0_mass, diag.mass_tol),
            corollary_branch=corollary_branch(growth, trend, delta, u0_mass),
            weak_limit_defects=defects,
            identity_checks=checks,
            field_checks=field_checks or FieldChecks(),
            notes=notes,
        )
        logger.info(
            f"Report: growth={growth.value} F_trend={trend.verdict.value} "
            f"m_hat={delta.delta_weight if delta else None} termination={termination_reason.value}"
        )
        return report


def _cutoff_record(c: Cutoff) -> CutoffRecord:
    v = c.verification
    return CutoffRecord(
        r=c.r,
        n=c.n,
        A=c.A,
        B=c.B,
        max_gradient_ratio=v.max_gradient_ratio if v else None,
        max_laplacian_ratio=v.max_laplacian_ratio if v else None,
        passed=c.verified,
    )
