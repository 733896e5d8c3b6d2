"""
数值容器: 径向网格、场状态、截断函数

这些对象持有 numpy 数组, 因此使用 dataclass 而不是 pydantic 模型;
可序列化的记录 (配置、采样、报告) 在同目录的 pydantic 模块中。
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np


@dataclass(frozen=True)
class RadialGrid:
    """圆盘 B_R 上的单元中心环形网格 (构造后不可变)"""
    R: float
    N: int
    dr: float
    face_radii: np.ndarray
    cell_centers: np.ndarray
    cell_areas: np.ndarray
    face_weights: np.ndarray  # 2πρΔr, 两端边界面为 0

    @property
    def total_area(self) -> float:
        return float(np.pi * self.R ** 2)


@dataclass
class FieldState:
    """离散解 (u, v, w) 及模拟时钟; 每一步原地更新"""
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    t: float = 0.0
    step_count: int = 0
    # 初始快照
    u0: Optional[np.ndarray] = None
    v0: Optional[np.ndarray] = None
    w0: Optional[np.ndarray] = None

    def retain_initial(self) -> None:
        self.u0 = self.u.copy()
        self.v0 = self.v.copy()
        self.w0 = self.w.copy()

    def copy(self) -> "FieldState":
        return FieldState(
            u=self.u.copy(), v=self.v.copy(), w=self.w.copy(),
            t=self.t, step_count=self.step_count,
            u0=self.u0, v0=self.v0, w0=self.w0,
        )


@dataclass(frozen=True)
class CutoffVerification:
    """截断函数校验报告"""
    max_gradient_ratio: float
    max_laplacian_ratio: float
    A: float
    B: float
    gradient_ok: bool
    laplacian_ok: bool
    worst_face: int
    worst_cell: int

    @property
    def passed(self) -> bool:
        return self.gradient_ok and self.laplacian_ok


@dataclass(frozen=True)
class Cutoff:
    """以原点为中心的离散截断函数 φ_(0,r,n)"""
    r: float
    n: int
    phi: np.ndarray
    phi_face: np.ndarray
    A: float
    B: float
    verification: Optional[CutoffVerification] = None

    @property
    def verified(self) -> bool:
        return self.verification is not None and self.verification.passed


@dataclass(frozen=True)
class SobolevConstant:
    """Sobolev 不等式常数 K_Sob 的估计"""
    K_sob: float
    family_size: int
    max_ratio_witness: str
    max_ratio: float
    ratios: List[float] = field(default_factory=list, repr=False)
