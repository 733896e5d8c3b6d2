"""
初始数据构造

u₀ 由函数族生成后做离散归一化, 使 integrate(u₀) 恰为 total_mass。
"""
import logging

import numpy as np

from app.core.exceptions import ResolutionError
from app.models.fields import FieldState, RadialGrid
from app.models.run_config import CompanionMode, InitConfig, InitFamily

logger = logging.getLogger(__name__)


def _profile(grid: RadialGrid, init: InitConfig) -> np.ndarray:
    r = grid.cell_centers
    sigma = init.sigma
    if init.family == InitFamily.GAUSSIAN:
        return np.exp(-(r / sigma) ** 2)
    if init.family == InitFamily.ANNULUS:
        return np.exp(-((r - 0.5 * grid.R) / sigma) ** 2)
    if init.family == InitFamily.TWO_SCALE:
        broad = 0.5 * grid.R
        core = np.exp(-(r / sigma) ** 2) / sigma ** 2
        pedestal = 0.25 * np.exp(-(r / broad) ** 2) / broad ** 2
        return core + pedestal
    return np.ones(grid.N)


def _companion(mode: CompanionMode, constant: float, u0: np.ndarray) -> np.ndarray:
    if mode == CompanionMode.COPY_U:
        return u0.copy()
    if mode == CompanionMode.CONSTANT:
        return np.full(u0.shape, constant, dtype=np.float64)
    return np.zeros_like(u0)


def init_fields(grid: RadialGrid, init: InitConfig) -> FieldState:
    """
    按配置构造 (u₀, v₀, w₀)

    Raises:
        ResolutionError: σ ≤ 2Δr
    """
    if init.family != InitFamily.UNIFORM and init.sigma <= 2.0 * grid.dr:
        raise ResolutionError(
            f"initial data width sigma={init.sigma} is under-resolved (2*dr={2.0 * grid.dr:.6g})"
        )
    shape = _profile(grid, init)
    u0 = shape * (init.total_mass / float(np.dot(shape, grid.cell_areas)))

    state = FieldState(
        u=u0,
        v=_companion(init.v0_mode, init.v0_constant, u0),
        w=_companion(init.w0_mode, init.w0_constant, u0),
    )
    state.retain_initial()
    logger.debug(f"Initial data {init.family.value}: mass={init.total_mass:.6g} max={u0.max():.6g}")
    return state
