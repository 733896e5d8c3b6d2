from fastapi import APIRouter

from app.core.config import settings
from app.models.report import SCHEMA_VERSION

router = APIRouter()


@router.get("/")
async def root():
    return {
        "message": settings.app_name,
        "version": "1.0.0",
        "environment": settings.environment,
        "report_schema_version": SCHEMA_VERSION,
        "features": {
            "radial_finite_volume_solver": True,
            "localized_lyapunov_functionals": True,
            "concentration_diagnostics": True,
            "mass_sweeps": True,
        },
    }


@router.get("/endpoints")
async def list_endpoints():
    return {
        "run": "POST /api/v1/simulations/run",
        "validate": "POST /api/v1/simulations/validate",
        "report": "POST /api/v1/simulations/report",
        "sobolev_constant": "GET /api/v1/simulations/sobolev-constant",
        "health": "GET /api/v1/health",
    }
