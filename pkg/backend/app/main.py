from fastapi import FastAPI
from loguru import logger

from app.api.routes import router as api_router
from app.core.config import get_settings

settings = get_settings()

# 计算接口与 CLI 共用同一套服务层
app = FastAPI(
    title=settings.app_name,
    description="GL(n) 局部 Kloosterman 和与上界验证 / Local GL(n) Kloosterman sums and bound verification",
    version="0.1.0",
)
app.include_router(api_router)


@app.on_event("startup")
def on_startup() -> None:
    logger.info("报告目录: {}", settings.report_path())
