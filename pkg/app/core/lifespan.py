import logging
from contextlib import asynccontextmanager

from app.api.dependencies import get_sobolev_constant
from app.core.config import settings

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app):
    """应用生命周期管理"""
    # 预热默认网格上的 Sobolev 常数
    try:
        K = get_sobolev_constant(1.0, 512, settings.sobolev_seed)
        logger.info(f"Sobolev constant preloaded: K_sob={K.K_sob:.6g} ({K.family_size} probes)")
    except Exception as e:
        logger.warning(f"Failed to preload Sobolev constant: {e}")

    yield

    logger.info("Shutting down...")
