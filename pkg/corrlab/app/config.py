"""Configuration for the corrlab front end and library defaults"""

from pathlib import Path
import sys
from typing import Optional

from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

ROOT_DIR = Path(__file__).resolve().parents[2]
PACKAGE_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.append(str(ROOT_DIR))

from config.shared_settings import shared_settings


class Settings(BaseSettings):
    """Configuration for corrlab."""

    # Metadata
    SERVICE_NAME: str = shared_settings.CORRLAB_SERVICE_NAME
    VERSION: str = shared_settings.CORRLAB_VERSION
    APP_ENV: str = shared_settings.APP_ENV

    # Numerics
    ABS_EPS: float = Field(
        default=shared_settings.CORRLAB_ABS_EPS,
        validation_alias=AliasChoices("CORRLAB_ABS_EPS", "ABS_EPS"),
    )
    REL_EPS: float = Field(
        default=shared_settings.CORRLAB_REL_EPS,
        validation_alias=AliasChoices("CORRLAB_REL_EPS", "REL_EPS"),
    )
    DEFAULT_SEED: int = Field(
        default=shared_settings.CORRLAB_DEFAULT_SEED,
        validation_alias=AliasChoices("CORRLAB_DEFAULT_SEED", "SEED"),
    )

    # Scenario runner
    SUITE_JOBS: int = Field(
        default=shared_settings.CORRLAB_SUITE_JOBS,
        validation_alias=AliasChoices("CORRLAB_SUITE_JOBS", "JOBS"),
    )
    REPORT_TIMINGS: bool = Field(
        default=shared_settings.CORRLAB_REPORT_TIMINGS,
        validation_alias=AliasChoices("CORRLAB_REPORT_TIMINGS", "REPORT_TIMINGS"),
    )
    CORPUS_DIR: str = shared_settings.CORRLAB_CORPUS_DIR

    # Logging
    LOG_LEVEL: str = Field(
        default=shared_settings.CORRLAB_LOG_LEVEL,
        validation_alias=AliasChoices("CORRLAB_LOG_LEVEL", "LOG_LEVEL"),
    )
    LOG_FILE: Optional[str] = Field(
        default=shared_settings.CORRLAB_LOG_FILE,
        validation_alias=AliasChoices("CORRLAB_LOG_FILE", "LOG_FILE"),
    )

    model_config = SettingsConfigDict(
        env_file=[str(PACKAGE_DIR / ".env"), str(ROOT_DIR / ".env")],
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="allow",
    )


settings = Settings()
