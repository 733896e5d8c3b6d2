"""
系统 (P) 的径向有限体积求解器

    u_t = Δu − ∇·(u∇w),  v_t = −v + u,  w_t = Δw − w + v,  0-Neumann 边界

Lie 分裂顺序 u → v → w:
  (1) u: 显式迎风趋化通量, 然后 θ-隐式扩散 (r 加权内积下的对称三对角求解);
  (2) v: 冻结新 u 的精确指数更新;
  (3) w: 以新 v 为源项的 θ-隐式求解。
两个 u 子步都是伸缩求和形式, 离散质量守恒是代数恒等式。
"""
import logging
from typing import Optional

import numpy as np
from scipy.linalg import solveh_banded

from app.core.exceptions import DivergenceError, PositivityError, StiffnessError
from app.models.fields import FieldState, RadialGrid
from app.models.run_config import SolverConfig
from app.services.radial_grid import face_gradient

logger = logging.getLogger(__name__)


def _flux_divergence(grid: RadialGrid, flux: np.ndarray) -> np.ndarray:
    """(1/(r_iΔr))·[ρ_{i+1}F_{i+1} − ρ_iF_i]; 边界面通量为零"""
    rho_flux = grid.face_radii * flux
    rho_flux[0] = 0.0
    rho_flux[-1] = 0.0
    return np.diff(rho_flux) / (grid.cell_centers * grid.dr)


def laplacian_radial(grid: RadialGrid, z) -> np.ndarray:
    """径向 Laplace 算子 (1/r)(r z_r)_r 的守恒离散"""
    return _flux_divergence(grid, face_gradient(grid, z))


def chemotactic_divergence(grid: RadialGrid, u, w) -> np.ndarray:
    """
    ∇·(u∇w) 的一阶迎风离散

    面通量 F = u_donor · (∇w)_face, 供体单元由 w 梯度的符号决定:
    梯度为正时质量向外流, 取内侧单元。
    """
    u = np.asarray(u, dtype=np.float64)
    g = face_gradient(grid, w)
    flux = np.zeros(grid.N + 1, dtype=np.float64)
    gi = g[1:-1]
    flux[1:-1] = np.where(gi > 0.0, u[:-1], u[1:]) * gi
    return _flux_divergence(grid, flux)


def compute_w_t(grid: RadialGrid, state: FieldState) -> np.ndarray:
    """第三个方程的右端 Δw − w + v"""
    return laplacian_radial(grid, state.w) - state.w + state.v


def outflow_rate(grid: RadialGrid, w) -> np.ndarray:
    """
    迎风格式下每个单元的流出率 (1/(r_iΔr))·[ρ_{i+1}(g_{i+1})⁺ + ρ_i(g_i)⁻]

    显式趋化子步满足 u_i^new ≥ (1 − dt·rate_i)·u_i。
    """
    g = face_gradient(grid, w)
    rho = grid.face_radii
    out = rho[1:] * np.maximum(g[1:], 0.0) + rho[:-1] * np.maximum(-g[:-1], 0.0)
    return out / (grid.cell_centers * grid.dr)


def adaptive_dt(grid: RadialGrid, state: FieldState, config: SolverConfig) -> float:
    """
    dt = min(dt_max, cfl·Δr / max|∇w|, cfl / max_i rate_i), 下限 dt_floor

    第三项保证任意 cfl ≤ 0.9 下显式子步不产生负 u (w 向外增加时原点单元
    经两倍速率流出)。扩散是隐式的, 不限制步长。
    """
    if not config.chemotaxis:
        return config.dt_max
    gmax = float(np.max(np.abs(face_gradient(grid, state.w))))
    dt = config.dt_max
    if gmax > 0.0:
        dt = min(dt, config.cfl * grid.dr / gmax)
    rate = float(np.max(outflow_rate(grid, state.w)))
    if rate > 0.0:
        dt = min(dt, config.cfl / rate)
    return max(dt, config.dt_floor)


def _stiffness_banded(grid: RadialGrid) -> tuple:
    """
    r 加权扩散刚度矩阵 K 的上带存储

    a_i(Lz)_i = −(Kz)_i, κ_f = 2πρ_f/Δr (内部面)。
    """
    kappa = 2.0 * np.pi * grid.face_radii / grid.dr
    kappa[0] = 0.0
    kappa[-1] = 0.0
    diag = kappa[:-1] + kappa[1:]
    offdiag = -kappa[1:-1]
    return diag, offdiag


def _theta_solve(grid: RadialGrid, rhs_cells: np.ndarray, dt: float, theta: float,
                 reaction: float = 0.0) -> np.ndarray:
    """
    解 (I − θdt(L − reaction))x = rhs_cells

    两边乘以单元面积后矩阵 diag(a(1 + θdt·reaction)) + θdt·K 对称正定。
    """
    diag_k, off_k = _stiffness_banded(grid)
    ab = np.zeros((2, grid.N), dtype=np.float64)
    ab[0, 1:] = theta * dt * off_k
    ab[1, :] = grid.cell_areas * (1.0 + theta * dt * reaction) + theta * dt * diag_k
    return solveh_banded(ab, grid.cell_areas * rhs_cells, check_finite=False)


def _check_finite(state: FieldState, where: str) -> None:
    for name in ("u", "v", "w"):
        arr = getattr(state, name)
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(
                f"non-finite values in {name} after {where} at t={state.t:.6g}",
                t=state.t, step_count=state.step_count,
            )


def _enforce_positivity(grid: RadialGrid, u: np.ndarray, mass: float, tol: float,
                        state: FieldState) -> np.ndarray:
    """把 [−tol·max u, 0) 的下冲截为 0, 并按比例恢复质量"""
    umin = float(np.min(u))
    if umin >= 0.0:
        return u
    umax = float(np.max(u))
    if umin < -tol * umax:
        raise PositivityError(
            f"u undershoot {umin:.3e} exceeds tolerance {tol:.1e}*max(u) at t={state.t:.6g}",
            t=state.t, step_count=state.step_count,
        )
    u = np.maximum(u, 0.0)
    clipped_mass = float(np.dot(u, grid.cell_areas))
    if clipped_mass > 0.0:
        u *= mass / clipped_mass
    return u


class StiffnessMonitor:
    """统计步长连续处于下限的次数"""

    def __init__(self, config: SolverConfig):
        self.config = config
        self.pinned_steps = 0

    def observe(self, dt: float, state: FieldState) -> None:
        if dt <= self.config.dt_floor:
            self.pinned_steps += 1
        else:
            self.pinned_steps = 0
        if self.pinned_steps >= self.config.stiff_patience:
            raise StiffnessError(
                f"dt pinned at floor {self.config.dt_floor:.1e} for "
                f"{self.pinned_steps} consecutive steps (t={state.t:.6g})",
                t=state.t, step_count=state.step_count,
            )


def step(state: FieldState, grid: RadialGrid, config: SolverConfig,
         dt: Optional[float] = None) -> FieldState:
    """
    推进一个时间步 (原地修改并返回 state)

    Args:
        state: 当前离散解
        grid: 径向网格
        config: 求解器参数
        dt: 步长; 缺省时由 adaptive_dt 给出

    Returns:
        更新后的 state
    """
    if dt is None:
        dt = adaptive_dt(grid, state, config)
    theta = config.theta

    # (1) u: 迎风趋化 + θ-隐式扩散
    mass = float(np.dot(state.u, grid.cell_areas))
    u = state.u
    if config.chemotaxis:
        u = u - dt * chemotactic_divergence(grid, u, state.w)
    rhs = u
    if theta < 1.0:
        rhs = u + (1.0 - theta) * dt * laplacian_radial(grid, u)
    u = _theta_solve(grid, rhs, dt, theta)
    u = _enforce_positivity(grid, u, mass, config.positivity_floor, state)
    state.u = u

    # (2) v: v' = −v + u 在 u 冻结下的精确解
    decay = np.exp(-dt)
    state.v = decay * state.v + (-np.expm1(-dt)) * state.u

    # (3) w: w_t = Δw − w + v, 源项取新 v
    rhs = state.w + dt * state.v
    if theta < 1.0:
        rhs = rhs + (1.0 - theta) * dt * (laplacian_radial(grid, state.w) - state.w)
    state.w = _theta_solve(grid, rhs, dt, theta, reaction=1.0)

    state.t += dt
    state.step_count += 1
    _check_finite(state, "step")
    return state
