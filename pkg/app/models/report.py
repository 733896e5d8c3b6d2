"""
运行报告与扫描汇总 Schema

报告不含墙钟时间等非确定性字段, 同一配置的两次运行产生逐字节相同的 JSON。
"""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from app.models.run_config import RunConfig


SCHEMA_VERSION = "1.0"


class GrowthVerdict(str, Enum):
    BOUNDED = "bounded"
    GROWING = "growing"
    NUMERICALLY_COLLAPSED = "numerically_collapsed"
    INCONCLUSIVE = "inconclusive"


class FTrendVerdict(str, Enum):
    BOUNDED_BELOW = "bounded_below"
    DECREASING_UNBOUNDED = "decreasing_unbounded"
    INCONCLUSIVE = "inconclusive"


class Theorem3Verdict(str, Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    NOT_APPLICABLE = "not_applicable"


class CorollaryBranch(str, Enum):
    FULL_CONCENTRATION = "full_concentration"
    LYAPUNOV_UNBOUNDED = "lyapunov_unbounded"
    UNDETERMINED = "undetermined"
    NOT_APPLICABLE = "not_applicable"


class TerminationReason(str, Enum):
    COMPLETED = "completed"
    DIVERGENCE = "divergence"
    POSITIVITY = "positivity"
    STIFFNESS = "stiffness"
    STEP_BUDGET = "step_budget"


class CutoffRecord(BaseModel):
    """截断函数及其校验结果"""
    r: float
    n: int
    A: float
    B: float
    max_gradient_ratio: Optional[float] = None
    max_laplacian_ratio: Optional[float] = None
    passed: bool


class SobolevRecord(BaseModel):
    K_sob: float
    family_size: int
    max_ratio_witness: str
    max_ratio: float


class FTrend(BaseModel):
    """F 对 log t 的趋势拟合"""
    verdict: FTrendVerdict
    slope: float = Field(0.0, description="后半段 F 对 log t 的斜率")
    t_stat: float = Field(0.0, description="斜率 t 统计量")
    drop: float = Field(0.0, description="F(首个 t>0 采样) − F(末)")
    first_half_iqr: float = Field(0.0, description="前半段去趋势残差的四分位距")


class GrowupLocus(BaseModel):
    radius: float = Field(..., description="后期快照 argmax 半径的最大值")
    consistent: bool = Field(..., description="locus ≤ 2Δr")
    source: str = Field(..., description="snapshots 或 series")
    count: int


class ConcentrationPoint(BaseModel):
    r: float
    m: float


class DeltaWeight(BaseModel):
    """后期窗口上的 δ 权重估计"""
    curve: List[ConcentrationPoint] = Field(default_factory=list, description="(r_j, m̂(r_j)), r 递增")
    delta_weight: float
    remainder_mass: float
    cauchy_distance: Optional[float] = Field(None, description="末十分之一快照两两差的最大 L∞ 距离 (|x| > r_min)")
    window_size: int
    monotone: bool


class EpsRegularity(BaseModel):
    radius: float
    late_max_ball_mass: float
    attained: bool


class EightPiCheck(BaseModel):
    radius: float
    late_max_M_phi: float
    attained: bool


class StationaryResiduals(BaseModel):
    rho_cut: float
    u_minus_v_inf: float
    elliptic_l2: float
    drift_norm: float
    wt_l2: float


class MassIdentities(BaseModel):
    w_gap: float
    annulus_mass: float
    u_inf_bound_ok: bool


class WeakLimitDefect(BaseModel):
    """∫uξ 与 m̂ξ(0) + ∫fξ 的比较"""
    test_function: str
    observed: float
    predicted: float
    defect: float


class IdentityChecks(BaseModel):
    max_lyapunov_ratio: Optional[float] = None
    max_localized_ratio: Dict[str, float] = Field(default_factory=dict)
    f_monotonicity_excess: float = 0.0
    min_jensen_gap: Optional[float] = None
    mt_ratio_range: Dict[str, float] = Field(default_factory=dict)
    w_monitor_sup: Optional[float] = None
    l1_bound_excess_v: Optional[float] = None
    l1_bound_excess_w: Optional[float] = None
    v_law_defect: Optional[float] = None


class FieldChecks(BaseModel):
    """运行中对采样状态逐个做的检查 (不进入 CSV)"""
    samples_checked: int = 0
    max_step_lyapunov_ratio: Optional[float] = Field(None, description="单步 Lyapunov 恒等式缺陷 / (|F|+D+1) 的最大值")
    max_step_localized_ratio: Dict[str, float] = Field(default_factory=dict, description="按截断半径的单步局部化恒等式缺陷比")
    sobolev_min_slack: Optional[float] = None
    sobolev_passed: bool = True
    sobolev_worst_t: Optional[float] = None
    young_min_ratio: Optional[float] = None
    young_passed: bool = True


class RunReport(BaseModel):
    """运行结束后的分类报告"""
    schema_version: str = SCHEMA_VERSION
    config_hash: str
    termination_reason: TerminationReason
    termination_detail: Optional[str] = None
    t_final: float
    step_count: int
    sample_count: int
    R: float
    N: int
    dr: float
    u0_mass: float
    cutoffs: List[CutoffRecord] = Field(default_factory=list)
    sobolev: SobolevRecord
    growth_verdict: GrowthVerdict
    growup_locus: Optional[GrowupLocus] = None
    f_trend: FTrend
    delta_weight: Optional[DeltaWeight] = None
    eps_reg_threshold: float
    eps_regularity: List[EpsRegularity] = Field(default_factory=list)
    eps_reg_attained: Optional[bool] = None
    eightpi: Optional[EightPiCheck] = None
    stationary_residuals: Optional[StationaryResiduals] = None
    mass_identities: Optional[MassIdentities] = None
    theorem3_verdict: Theorem3Verdict = Theorem3Verdict.NOT_APPLICABLE
    corollary_branch: CorollaryBranch = CorollaryBranch.NOT_APPLICABLE
    weak_limit_defects: List[WeakLimitDefect] = Field(default_factory=list)
    identity_checks: IdentityChecks = Field(default_factory=IdentityChecks)
    field_checks: FieldChecks = Field(default_factory=FieldChecks)
    notes: List[str] = Field(default_factory=list)


class RunMeta(BaseModel):
    """写在 run_meta.json 中, 供 report 子命令重建诊断"""
    config: RunConfig
    config_hash: str
    termination_reason: TerminationReason
    termination_detail: Optional[str] = None
    step_count: int
    t_final: float
    snapshots: List[str] = Field(default_factory=list, description="快照文件名, 按时间排序 (含最终状态)")
    field_checks: FieldChecks = Field(default_factory=FieldChecks)


class SweepRow(BaseModel):
    """扫描汇总中的一行"""
    multiplier: float
    mass: float
    directory: str
    status: str = Field(..., description="ok 或失败原因")
    termination_reason: Optional[str] = None
    growth_verdict: Optional[str] = None
    f_trend: Optional[str] = None
    delta_weight: Optional[float] = None
    eps_reg_threshold: Optional[float] = None
    eps_reg_attained: Optional[bool] = None
    eightpi_attained: Optional[bool] = None
    error: Optional[str] = None


class ValidationOutcome(BaseModel):
    """validate 子命令的结果"""
    path: str
    valid: bool
    rows: int = 0
    problems: List[str] = Field(default_factory=list)
