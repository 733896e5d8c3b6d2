"""
径向网格与求积

单元中心均匀网格, 原点是第一个单元的左面 (ρ_0 = 0), 因此 1/r 奇性
不会出现在任何求值点上。求积采用精确单元面积的中点规则, 质量守恒是
代数上的伸缩求和恒等式。
"""
import numpy as np

from app.core.exceptions import ConfigError, ContractViolation
from app.models.fields import RadialGrid


MIN_CELLS = 4


def build_grid(R: float, N: int) -> RadialGrid:
    """构造圆盘 B_R 上 N 个单元的径向网格"""
    if not np.isfinite(R) or R <= 0:
        raise ConfigError(f"domain.R must be positive, got {R}")
    if int(N) != N or N < MIN_CELLS:
        raise ConfigError(f"domain.N must be an integer >= {MIN_CELLS}, got {N}")
    N = int(N)
    R = float(R)

    dr = R / N
    face_radii = np.arange(N + 1, dtype=np.float64) * dr
    face_radii[-1] = R
    cell_centers = 0.5 * (face_radii[:-1] + face_radii[1:])
    cell_areas = np.pi * (face_radii[1:] ** 2 - face_radii[:-1] ** 2)

    face_weights = 2.0 * np.pi * face_radii * dr
    face_weights[0] = 0.0
    face_weights[-1] = 0.0

    for arr in (face_radii, cell_centers, cell_areas, face_weights):
        arr.flags.writeable = False

    return RadialGrid(
        R=R, N=N, dr=dr,
        face_radii=face_radii,
        cell_centers=cell_centers,
        cell_areas=cell_areas,
        face_weights=face_weights,
    )


def _check_cells(grid: RadialGrid, f: np.ndarray, name: str = "f") -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (grid.N,):
        raise ContractViolation(f"{name} has shape {f.shape}, expected ({grid.N},)")
    return f


def integrate(grid: RadialGrid, f) -> float:
    """∫_Ω f dx = Σ f_i a_i"""
    f = _check_cells(grid, f)
    if not np.all(np.isfinite(f)):
        raise ContractViolation("integrand contains non-finite values")
    return float(np.dot(f, grid.cell_areas))


def integrate_faces(grid: RadialGrid, g, weight=None) -> float:
    """面求积 Σ_f g_f · 2πρ_fΔr (可选权重, 例如 phi_face)"""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (grid.N + 1,):
        raise ContractViolation(f"face values have shape {g.shape}, expected ({grid.N + 1},)")
    w = grid.face_weights if weight is None else grid.face_weights * weight
    return float(np.dot(g, w))


def face_gradient(grid: RadialGrid, z) -> np.ndarray:
    """
    面梯度 (z_{i+1} − z_i)/Δr

    返回长度 N+1 的数组; ρ_0 (径向对称) 与 ρ_N (0-Neumann) 处定义为 0。
    """
    z = _check_cells(grid, z, "z")
    g = np.zeros(grid.N + 1, dtype=np.float64)
    g[1:-1] = np.diff(z) / grid.dr
    return g


def face_average(grid: RadialGrid, z) -> np.ndarray:
    """单元值到内部面的算术平均; 边界面取相邻单元值"""
    z = _check_cells(grid, z, "z")
    zf = np.empty(grid.N + 1, dtype=np.float64)
    zf[1:-1] = 0.5 * (z[:-1] + z[1:])
    zf[0] = z[0]
    zf[-1] = z[-1]
    return zf


def ball_mask(grid: RadialGrid, radius: float) -> np.ndarray:
    """中心位于 B_radius 内的单元"""
    return grid.cell_centers < radius


def annulus_mask(grid: RadialGrid, rho_cut: float) -> np.ndarray:
    """中心位于 |x| > rho_cut 的单元"""
    return grid.cell_centers > rho_cut
