"""
依赖注入
"""
from functools import lru_cache

from app.models.fields import SobolevConstant
from app.services.functionals import estimate_K_sob
from app.services.radial_grid import build_grid


@lru_cache(maxsize=32)
def get_sobolev_constant(R: float, N: int, seed: int) -> SobolevConstant:
    """返回缓存的 K_Sob 估计 (只依赖网格与种子)"""
    return estimate_K_sob(build_grid(R, N), seed)
