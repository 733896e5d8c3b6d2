# api/v1/__init__.py
from .health import router as health_router
from .system_info import router as system_info_router
from .simulations import router as simulations_router

__all__ = [
    "health_router",
    "system_info_router",
    "simulations_router",
]
