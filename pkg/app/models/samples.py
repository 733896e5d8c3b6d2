"""
时间序列采样记录与 CSV 列布局

列顺序固定: 标量列, 每个截断半径一组块列 (后缀 @半径), 球质量列, w 监视器。
"""
from typing import Dict, List, Sequence

from pydantic import BaseModel, Field


SCALAR_COLUMNS = (
    "t", "dt", "mass_u", "mass_v", "mass_w", "linf_u", "argmax_radius",
    "entropy", "F", "D", "wt_l2",
)
CUTOFF_COLUMNS = (
    "M_phi", "F_phi", "D_phi", "R_phi", "gradw_l2_phi", "mt_ratio", "jensen_gap",
)
BALL_COLUMN = "ball_mass"
MONITOR_COLUMN = "w_monitor"


def format_radius(radius: float) -> str:
    return repr(float(radius))


class CutoffSample(BaseModel):
    """一个截断函数上的局部化量"""
    radius: float = Field(..., description="截断内半径 r")
    M_phi: float = Field(..., description="∫uφ")
    F_phi: float = Field(..., description="局部化 Lyapunov 泛函")
    D_phi: float = Field(..., description="局部化耗散")
    R_phi: float = Field(..., description="余项 R(u,w,φ)")
    gradw_l2_phi: float = Field(..., description="∫|∇w|²φ")
    mt_ratio: float = Field(..., description="log∫e^{aw}φ − (a²/16π)∫|∇w|²φ")
    jensen_gap: float = Field(..., description="Jensen 不等式的 RHS − LHS")


class FunctionalSample(BaseModel):
    """时间序列的一行"""
    t: float
    dt: float
    mass_u: float
    mass_v: float
    mass_w: float
    linf_u: float
    argmax_radius: float
    entropy: float
    F: float
    D: float
    wt_l2: float
    cutoffs: List[CutoffSample] = Field(default_factory=list)
    ball_masses: List[float] = Field(default_factory=list, description="∫_{B_r}u, 与 cutoffs 同序")
    w_monitor: float = Field(0.0, description="max w_i r_i^{(2−p)/p}")

    def cutoff(self, radius: float) -> CutoffSample:
        for block in self.cutoffs:
            if block.radius == radius:
                return block
        raise KeyError(radius)


def csv_header(radii: Sequence[float]) -> List[str]:
    header = list(SCALAR_COLUMNS)
    for r in radii:
        header.extend(f"{name}@{format_radius(r)}" for name in CUTOFF_COLUMNS)
    header.extend(f"{BALL_COLUMN}@{format_radius(r)}" for r in radii)
    header.append(MONITOR_COLUMN)
    return header


def radii_from_header(header: Sequence[str]) -> List[float]:
    """从表头恢复截断半径 (按出现顺序)"""
    radii = []
    prefix = f"{CUTOFF_COLUMNS[0]}@"
    for name in header:
        if name.startswith(prefix):
            radii.append(float(name[len(prefix):]))
    return radii


def sample_to_row(sample: FunctionalSample) -> List[str]:
    row = [repr(float(getattr(sample, name))) for name in SCALAR_COLUMNS]
    for block in sample.cutoffs:
        row.extend(repr(float(getattr(block, name))) for name in CUTOFF_COLUMNS)
    row.extend(repr(float(m)) for m in sample.ball_masses)
    row.append(repr(float(sample.w_monitor)))
    return row


def sample_from_record(record: Dict[str, str], radii: Sequence[float]) -> FunctionalSample:
    """由 csv.DictReader 的一行还原 FunctionalSample"""
    scalars = {name: float(record[name]) for name in SCALAR_COLUMNS}
    blocks = []
    for r in radii:
        suffix = f"@{format_radius(r)}"
        blocks.append(CutoffSample(
            radius=r,
            **{name: float(record[name + suffix]) for name in CUTOFF_COLUMNS},
        ))
    return FunctionalSample(
        **scalars,
        cutoffs=blocks,
        ball_masses=[float(record[f"{BALL_COLUMN}@{format_radius(r)}"]) for r in radii],
        w_monitor=float(record[MONITOR_COLUMN]),
    )
