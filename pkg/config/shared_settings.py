"""Shared configuration definitions for corrlab."""

from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict  # type: ignore[import-not-found]


class SharedSettings(BaseSettings):
    """Global defaults and environment-driven overrides."""

    # Environment
    APP_ENV: str = "development"

    # Library metadata
    CORRLAB_SERVICE_NAME: str = "corrlab"
    CORRLAB_VERSION: str = "0.3.0"

    # Numerics
    CORRLAB_ABS_EPS: float = 1e-9
    CORRLAB_REL_EPS: float = 1e-8
    CORRLAB_DEFAULT_SEED: int = 0

    # Scenario runner
    CORRLAB_SUITE_JOBS: int = 2
    CORRLAB_REPORT_TIMINGS: bool = False
    CORRLAB_CORPUS_DIR: str = str(Path(__file__).resolve().parent.parent / "corrlab" / "corpus")

    # Logging defaults
    CORRLAB_LOG_LEVEL: str = "WARNING"
    CORRLAB_LOG_FILE: Optional[str] = None

    model_config = SettingsConfigDict(
        env_file=str(Path(__file__).resolve().parent.parent / ".env"),
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="allow",
    )


shared_settings = SharedSettings()
