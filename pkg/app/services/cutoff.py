"""
原点截断函数 φ_(0,r,n) = ψⁿ 的构造与校验

ψ 为五次 smoothstep (C²), s = (|x| − r)/r 截断到 [0,1]:
    ψ(s) = 1 − (6s⁵ − 15s⁴ + 10s³)
常数 A、B 不是符号给出的, 而是在支撑上测量离散比值
|∇φ|/φ^{1−1/n} 与 |Δφ|/φ^{1−2/n} 的最大值后乘以 1.05 得到。
比值分母中的 φ 取模板最大值 (面: 相邻两单元; 单元: 三点模板)。
"""
import logging
from dataclasses import replace
from typing import Iterable, List

import numpy as np

from app.core.exceptions import ResolutionError
from app.models.fields import Cutoff, CutoffVerification, RadialGrid
from app.services.radial_grid import face_gradient
from app.services.solver import laplacian_radial

logger = logging.getLogger(__name__)

INFLATION = 1.05
MIN_TRANSITION_CELLS = 8
# 比值容差 (浮点舍入)
RATIO_SLACK = 1e-12


def smoothstep_profile(s) -> np.ndarray:
    """ψ(s), s 截断到 [0, 1]"""
    s = np.clip(np.asarray(s, dtype=np.float64), 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def smoothstep_derivative(s) -> np.ndarray:
    """ψ'(s) = −30 s²(1 − s)², 在 [0,1] 外为 0"""
    s = np.asarray(s, dtype=np.float64)
    inside = (s > 0.0) & (s < 1.0)
    return np.where(inside, -30.0 * s ** 2 * (1.0 - s) ** 2, 0.0)


def cutoff_values(radii, r: float, n: int) -> np.ndarray:
    return smoothstep_profile((np.asarray(radii) - r) / r) ** n


def _face_stencil_max(phi: np.ndarray) -> np.ndarray:
    out = np.zeros(phi.size + 1, dtype=np.float64)
    out[1:-1] = np.maximum(phi[:-1], phi[1:])
    return out


def _cell_stencil_max(phi: np.ndarray) -> np.ndarray:
    padded = np.concatenate(([phi[0]], phi, [phi[-1]]))
    return np.maximum(np.maximum(padded[:-2], padded[1:-1]), padded[2:])


def _discrete_ratios(grid: RadialGrid, phi: np.ndarray, n: int):
    """返回 (面梯度比值, 单元 Laplace 比值), 支撑外为 0"""
    grad = np.abs(face_gradient(grid, phi))
    lap = np.abs(laplacian_radial(grid, phi))

    face_phi = _face_stencil_max(phi)
    cell_phi = _cell_stencil_max(phi)

    grad_ratio = np.zeros_like(grad)
    on_face = face_phi > 0.0
    grad_ratio[on_face] = grad[on_face] / face_phi[on_face] ** (1.0 - 1.0 / n)

    lap_ratio = np.zeros_like(lap)
    on_cell = cell_phi > 0.0
    lap_ratio[on_cell] = lap[on_cell] / cell_phi[on_cell] ** (1.0 - 2.0 / n)
    return grad_ratio, lap_ratio


def transition_cell_count(grid: RadialGrid, r: float) -> int:
    centers = grid.cell_centers
    return int(np.count_nonzero((centers > r) & (centers < 2.0 * r)))


def build_cutoff(grid: RadialGrid, r: float, n: int) -> Cutoff:
    """
    构造 φ_(0,r,n) 并测量常数 A, B

    Raises:
        ResolutionError: 0 < 2r < R 不成立, n < 4, 或过渡环少于 8 个单元
    """
    if not 0.0 < 2.0 * r < grid.R:
        raise ResolutionError(f"cutoff radius r={r} must satisfy 0 < 2r < R={grid.R}")
    if n < 4:
        raise ResolutionError(f"cutoff exponent n={n} must be at least 4")
    cells = transition_cell_count(grid, r)
    if cells < MIN_TRANSITION_CELLS:
        raise ResolutionError(
            f"transition annulus {r} < |x| < {2 * r} holds {cells} cells, "
            f"need at least {MIN_TRANSITION_CELLS}"
        )

    phi = cutoff_values(grid.cell_centers, r, n)
    phi_face = cutoff_values(grid.face_radii, r, n)
    phi.flags.writeable = False
    phi_face.flags.writeable = False

    grad_ratio, lap_ratio = _discrete_ratios(grid, phi, n)
    A = INFLATION * float(np.max(grad_ratio))
    B = INFLATION * float(np.max(lap_ratio))

    cutoff = Cutoff(r=float(r), n=int(n), phi=phi, phi_face=phi_face, A=A, B=B)
    verification = verify_cutoff(cutoff, grid)
    if not verification.passed:
        raise ResolutionError(f"cutoff r={r}, n={n} failed its own verification")
    logger.debug(f"Built cutoff r={r} n={n}: A={A:.6g} B={B:.6g} ({cells} transition cells)")
    return replace(cutoff, verification=verification)


def verify_cutoff(cutoff: Cutoff, grid: RadialGrid) -> CutoffVerification:
    """检查 |∇φ| ≤ Aφ^{1−1/n} 与 |Δφ| ≤ Bφ^{1−2/n}; 失败写入报告, 不抛异常"""
    grad_ratio, lap_ratio = _discrete_ratios(grid, cutoff.phi, cutoff.n)
    max_grad = float(np.max(grad_ratio))
    max_lap = float(np.max(lap_ratio))
    return CutoffVerification(
        max_gradient_ratio=max_grad,
        max_laplacian_ratio=max_lap,
        A=cutoff.A,
        B=cutoff.B,
        gradient_ok=max_grad <= cutoff.A * (1.0 + RATIO_SLACK),
        laplacian_ok=max_lap <= cutoff.B * (1.0 + RATIO_SLACK),
        worst_face=int(np.argmax(grad_ratio)),
        worst_cell=int(np.argmax(lap_ratio)),
    )


def build_cutoff_family(grid: RadialGrid, radii: Iterable[float], n: int) -> List[Cutoff]:
    """按半径递减构造截断族; 无法解析的半径被剔除并记录警告"""
    family = []
    for r in sorted(radii, reverse=True):
        try:
            family.append(build_cutoff(grid, r, n))
        except ResolutionError as e:
            logger.warning(f"Skipping cutoff radius {r}: {e.message}")
    return family
