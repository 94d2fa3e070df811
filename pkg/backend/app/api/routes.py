from fastapi import APIRouter, Body, HTTPException, Path, Query
from loguru import logger

from app.core.config import get_settings
from app.core.errors import ConfigError, Infeasible, KloostermanError
from app.models.enums import CheckName
from app.schemas.kloosterman import GermReport, GermRequest, OrbitalReport, OrbitalRequest, SumReport, SumRequest
from app.schemas.report import SweepConfig, SweepSummary
from app.services.bounds_harness import (
    compute_germ_report,
    compute_orbital_report,
    compute_sum_report,
    run_sweep,
    spec_from_params,
)
from app.services.group_geometry import relevant_weyl_elements

router = APIRouter(prefix="/api", tags=["Kloosterman / 局部 Kloosterman 和"])


def _raise_http(exc: ValueError) -> None:
    """Infeasible → 422，ConfigError 及其它 ValueError → 400，其余领域错误 → 500。"""

    if isinstance(exc, Infeasible):
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    if isinstance(exc, ConfigError) or not isinstance(exc, KloostermanError):
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    logger.error("计算失败: {}", exc)
    raise HTTPException(status_code=500, detail=str(exc)) from exc


@router.get("/health")
def health():
    """服务状态 / Health"""
    settings = get_settings()
    return {"status": "ok", "app": settings.app_name, "version": "0.1.0"}


@router.post("/sum", response_model=SumReport)
def compute_sum(payload: SumRequest = Body(..., description="胞腔参数 / Cell parameters")):
    """计算 Kl_p(ψ; c, w_{G_n}) / Compute the Kloosterman sum"""
    settings = get_settings()
    try:
        return compute_sum_report(spec_from_params(payload, settings), payload.fast_gl4, settings)
    except ValueError as exc:
        _raise_http(exc)


@router.post("/orbital", response_model=OrbitalReport)
def compute_orbital(payload: OrbitalRequest = Body(..., description="余特征与单位 / Cocharacter")):
    """Dabrowski–Reeder 轨道积分 / Orbital integral"""
    try:
        return compute_orbital_report(payload, get_settings())
    except ValueError as exc:
        _raise_http(exc)


@router.post("/germ", response_model=GermReport)
def compute_germ(payload: GermRequest = Body(..., description="胞腔参数与可选组成 / Cell and composition")):
    """相对 Shalika 芽 / Relative Shalika germ"""
    try:
        return compute_germ_report(payload, get_settings())
    except ValueError as exc:
        _raise_http(exc)


@router.get("/weyl")
def list_weyl(n: int = Query(..., ge=1, le=8, description="矩阵阶数 / Rank")):
    """列出相关 Weyl 元 / Relevant Weyl elements"""
    return [
        {"composition": list(w.composition), "label": w.label, "matrix": w.int_matrix()}
        for w in relevant_weyl_elements(n)
    ]


@router.post("/check/{check}", response_model=SweepSummary)
def run_check(
    check: CheckName = Path(..., description="检查名称 / Check name"),
    config: SweepConfig = Body(...),
):
    """执行参数扫描并写出报告 / Run a verification sweep"""
    if config.check != check:
        config = config.model_copy(update={"check": check})
    try:
        return run_sweep(config, get_settings())
    except ValueError as exc:
        _raise_http(exc)
