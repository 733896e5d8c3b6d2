"""
模拟相关的 API 端点

运行在服务器线程池中同步执行, 不支持中途干预。
"""
import logging

from fastapi import APIRouter, HTTPException, Query
from pydantic import BaseModel, Field

from app.api.dependencies import get_sobolev_constant
from app.core.config import settings
from app.core.exceptions import ConfigError, ContractViolation, ResolutionError, SimulationError
from app.models.report import RunReport, SobolevRecord, ValidationOutcome
from app.models.run_config import RunConfig
from app.services.simulation_service import SimulationService, rerun_report, validate_csv

logger = logging.getLogger(__name__)

router = APIRouter(tags=["Simulations"])


class ValidateRequest(BaseModel):
    """CSV 校验请求"""
    csv_path: str = Field(..., description="时间序列 CSV 路径")


class ReportRequest(BaseModel):
    """报告重建请求"""
    run_dir: str = Field(..., description="运行输出目录")


def _http_error(e: SimulationError) -> HTTPException:
    if isinstance(e, (ConfigError, ResolutionError)):
        return HTTPException(status_code=422, detail=e.message)
    if isinstance(e, ContractViolation):
        return HTTPException(status_code=400, detail=e.message)
    return HTTPException(status_code=500, detail=f"Simulation failed: {e.message}")


@router.post("/run", response_model=RunReport)
def run_simulation(config: RunConfig) -> RunReport:
    """
    执行一次运行并返回报告
    """
    try:
        return SimulationService(config).run().report
    except SimulationError as e:
        raise _http_error(e)


@router.post("/validate", response_model=ValidationOutcome)
def validate_series(request: ValidateRequest) -> ValidationOutcome:
    return validate_csv(request.csv_path)


@router.post("/report", response_model=RunReport)
def rebuild_report(request: ReportRequest) -> RunReport:
    """
    由已存储的运行目录重建报告
    """
    try:
        return rerun_report(request.run_dir)
    except SimulationError as e:
        raise _http_error(e)
    except FileNotFoundError as e:
        raise HTTPException(status_code=404, detail=str(e))


@router.get("/sobolev-constant", response_model=SobolevRecord)
def sobolev_constant(
    R: float = Query(1.0, gt=0, description="圆盘半径"),
    N: int = Query(512, ge=4, description="单元数"),
    seed: int = Query(settings.sobolev_seed, description="探测族种子"),
) -> SobolevRecord:
    K = get_sobolev_constant(R, N, seed)
    return SobolevRecord(
        K_sob=K.K_sob,
        family_size=K.family_size,
        max_ratio_witness=K.max_ratio_witness,
        max_ratio=K.max_ratio,
    )
