"""
运行配置 Schema

每个分节对应 INI 文件中的一个 [section]; 未知键一律拒绝。
"""
import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


EIGHT_PI = 8.0 * math.pi


def _split_floats(value):
    """允许 INI 中以逗号分隔的列表"""
    if isinstance(value, str):
        items = [item.strip() for item in value.split(",")]
        return [float(item) for item in items if item]
    return value


class InitFamily(str, Enum):
    """初始数据族"""
    GAUSSIAN = "gaussian"
    ANNULUS = "annulus"
    TWO_SCALE = "two_scale"
    UNIFORM = "uniform"


class CompanionMode(str, Enum):
    """v0 / w0 的构造方式"""
    ZERO = "zero"
    COPY_U = "copy_u"
    CONSTANT = "constant"


class StrictSection(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class DomainConfig(StrictSection):
    """计算域"""
    R: float = Field(1.0, description="圆盘半径")
    N: int = Field(512, description="单元数")

    @field_validator("R")
    @classmethod
    def _positive_radius(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("N")
    @classmethod
    def _enough_cells(cls, v: int) -> int:
        if v < 4:
            raise ValueError("must be at least 4")
        return v


class InitConfig(StrictSection):
    """初始数据 (条件 (c): u0 ≥ 0 且不恒为零, v0, w0 ≥ 0)"""
    family: InitFamily = Field(InitFamily.GAUSSIAN, description="u0 的函数族")
    total_mass: float = Field(4.0 * math.pi, description="u0 的总质量")
    sigma: float = Field(0.1, description="宽度参数")
    v0_mode: CompanionMode = Field(CompanionMode.ZERO, description="v0 构造方式")
    v0_constant: float = Field(0.0, description="v0_mode=constant 时的常数")
    w0_mode: CompanionMode = Field(CompanionMode.ZERO, description="w0 构造方式")
    w0_constant: float = Field(0.0, description="w0_mode=constant 时的常数")

    @field_validator("total_mass", "sigma")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("v0_constant", "w0_constant")
    @classmethod
    def _nonnegative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("must be nonnegative")
        return v


class TimeConfig(StrictSection):
    """时间推进与采样"""
    t_end: float = Field(200.0, description="终止时间")
    sample_stride: int = Field(50, description="每隔多少步采样一次")
    snapshot_times: Optional[List[float]] = Field(None, description="快照时刻, 缺省为几何间隔")
    max_steps: int = Field(20_000_000, description="步数预算")

    @field_validator("snapshot_times", mode="before")
    @classmethod
    def _parse_times(cls, v):
        return _split_floats(v)

    @field_validator("t_end")
    @classmethod
    def _positive_horizon(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("sample_stride", "max_steps")
    @classmethod
    def _positive_count(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    def resolved_snapshot_times(self) -> List[float]:
        if self.snapshot_times is not None:
            return sorted(self.snapshot_times)
        return [self.t_end / 2 ** k for k in range(6, -1, -1)]


class SolverConfig(StrictSection):
    """求解器参数"""
    cfl: float = Field(0.4, description="对流 CFL 数")
    dt_max: float = Field(1e-3, description="步长上限")
    dt_initial: float = Field(1e-6, description="首步步长")
    dt_growth: float = Field(1.02, description="相邻两步的步长增长上限")
    dt_floor: float = Field(1e-12, description="步长下限")
    stiff_patience: int = Field(100, description="步长连续处于下限的容忍步数")
    positivity_floor: float = Field(1e-14, description="相对负下冲容差 (乘以 max u)")
    theta: float = Field(1.0, description="扩散隐式权重, 1=后向 Euler, 0.5=Crank-Nicolson")
    chemotaxis: bool = Field(True, description="关闭时为纯扩散模式")

    @field_validator("cfl")
    @classmethod
    def _cfl_range(cls, v: float) -> float:
        if not 0 < v <= 0.9:
            raise ValueError("must lie in (0, 0.9]")
        return v

    @field_validator("dt_max", "dt_floor", "dt_initial", "positivity_floor")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("theta")
    @classmethod
    def _theta_range(cls, v: float) -> float:
        if not 0.5 <= v <= 1.0:
            raise ValueError("must lie in [0.5, 1]")
        return v

    @field_validator("dt_growth")
    @classmethod
    def _growth(cls, v: float) -> float:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @field_validator("stiff_patience")
    @classmethod
    def _patience(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @model_validator(mode="after")
    def _floor_below_cap(self):
        if self.dt_floor > self.dt_max:
            raise ValueError("dt_floor must not exceed dt_max")
        return self


class CutoffsConfig(StrictSection):
    """原点截断函数族"""
    radii: List[float] = Field(default_factory=lambda: [0.25, 0.1, 0.05], description="截断内半径 (递减)")
    n: int = Field(8, description="截断指数")

    @field_validator("radii", mode="before")
    @classmethod
    def _parse_radii(cls, v):
        return _split_floats(v)

    @field_validator("radii")
    @classmethod
    def _decreasing(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("must contain at least one radius")
        if any(r <= 0 for r in v):
            raise ValueError("must be positive")
        return sorted(set(v), reverse=True)

    @field_validator("n")
    @classmethod
    def _exponent(cls, v: int) -> int:
        if v < 4:
            raise ValueError("must be at least 4")
        return v


class DiagnosticsConfig(StrictSection):
    """诊断阈值与窗口"""
    window_fraction: float = Field(0.25, description="后期窗口占运行时长的比例")
    eightpi_tol: float = Field(0.05, description="8π 判据的相对容差")
    mass_tol: float = Field(0.05, description="质量恒等式的相对容差")
    trend_tstat: float = Field(5.0, description="趋势拟合的 t 统计量阈值")
    rho_cut: float = Field(0.05, description="稳态残差的环域内半径")
    mt_exponent: float = Field(1.0, description="指数矩 ∫e^{aw}φ 中的 a")
    pointwise_p: float = Field(1.5, description="点态 w 监视器的指数 p ∈ (1,2)")
    sobolev_seed: int = Field(7, description="Sobolev 探测族种子")

    @field_validator("window_fraction")
    @classmethod
    def _fraction(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError("must lie in (0, 1]")
        return v

    @field_validator("eightpi_tol", "mass_tol")
    @classmethod
    def _tol(cls, v: float) -> float:
        if not 0 <= v < 1:
            raise ValueError("must lie in [0, 1)")
        return v

    @field_validator("trend_tstat", "rho_cut", "mt_exponent")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("pointwise_p")
    @classmethod
    def _p_range(cls, v: float) -> float:
        if not 1 < v < 2:
            raise ValueError("must lie in (1, 2)")
        return v


class OutputConfig(StrictSection):
    """输出位置"""
    directory: str = Field("run", description="运行输出目录")
    csv_name: str = Field("series.csv", description="时间序列文件名")
    report_name: str = Field("report.json", description="报告文件名")


class RunConfig(StrictSection):
    """一次运行的完整配置"""
    domain: DomainConfig = Field(default_factory=DomainConfig)
    init: InitConfig = Field(default_factory=InitConfig)
    time: TimeConfig = Field(default_factory=TimeConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    cutoffs: CutoffsConfig = Field(default_factory=CutoffsConfig)
    diagnostics: DiagnosticsConfig = Field(default_factory=DiagnosticsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _cross_section(self):
        dr = self.domain.R / self.domain.N
        if self.init.sigma <= 2 * dr:
            raise ValueError(f"init.sigma must exceed 2*dr = {2 * dr:.6g}")
        for ts in self.time.resolved_snapshot_times():
            if not 0 <= ts <= self.time.t_end:
                raise ValueError("time.snapshot_times must lie in [0, t_end]")
        for r in self.cutoffs.radii:
            if not 2 * r < self.domain.R:
                raise ValueError(f"cutoffs.radii entry {r} must satisfy 2r < R")
        return self

    @property
    def dr(self) -> float:
        return self.domain.R / self.domain.N


class SweepSpec(BaseModel):
    """质量扫描: 基础配置 + 8π 的倍数"""
    model_config = ConfigDict(extra="forbid")

    base: RunConfig
    mass_multipliers: List[float] = Field(default_factory=list, description="8π 的倍数 (升序)")
    output_root: str = Field("sweep", description="扫描共享输出根目录")

    @field_validator("mass_multipliers", mode="before")
    @classmethod
    def _parse_multipliers(cls, v):
        return _split_floats(v)

    @field_validator("mass_multipliers")
    @classmethod
    def _sorted_positive(cls, v: List[float]) -> List[float]:
        if any(m <= 0 for m in v):
            raise ValueError("must be positive")
        return sorted(v)
