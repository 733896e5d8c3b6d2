import os
from typing import Literal
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    # 应用配置
    app_name: str = "Radial Chemotaxis Grow-up Simulator"
    environment: str = os.getenv("ENVIRONMENT", "development")
    log_level: str = os.getenv("LOG_LEVEL", "INFO")

    # 输出根目录; 设置后相对输出目录挂在它下面
    output_root: str = os.getenv("CHEMOSIM_OUTPUT_ROOT", "")

    # 质量扫描配置
    sweep_workers: int = int(os.getenv("CHEMOSIM_SWEEP_WORKERS", "2"))
    sweep_executor: Literal["process", "thread"] = os.getenv("CHEMOSIM_SWEEP_EXECUTOR", "process")

    # API 调用时默认使用的 Sobolev 探测族种子
    sobolev_seed: int = int(os.getenv("CHEMOSIM_SOBOLEV_SEED", "7"))

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")


settings = Settings()
