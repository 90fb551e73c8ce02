import json
from pathlib import Path
from typing import Any, Optional, Tuple, Type

from pydantic import field_validator
from pydantic_settings import (
    BaseSettings,
    JsonConfigSettingsSource,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from fcdkit.core.exceptions import DataFileException


class Settings(BaseSettings):
    # App
    PROJECT_NAME: str = "fcdkit"
    VERSION: str = "0.1.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_DIR: Optional[str] = None  # None - лише консоль (stderr)

    # Randomness
    DEFAULT_SEED: int = 42

    # Metrics
    DCD_TEMPERATURE: float = 1000.0
    FSCORE_THRESHOLD: float = 0.01
    EMD_EXACT_MAX_POINTS: int = 1024  # O(n^3) assignment
    EMD_APPROX_ITERATIONS: int = 500
    EMD_APPROX_EPSILON: float = 1e-3
    P2F_CHUNK_SIZE: int = 512

    # Weighting schedule defaults (theta=2, tau=1, t=200, sigma=200)
    SCHEDULE_THETA: float = 2.0
    SCHEDULE_TAU: float = 1.0
    SCHEDULE_TRANSITION_EPOCH: int = 200
    SCHEDULE_TOTAL_EPOCHS: int = 400
    SCHEDULE_SIGMA: float = 200.0

    # Descent lab
    DIVERGENCE_FACTOR: float = 1e6
    SNAPSHOT_POINTS: int = 256

    # Batch
    BATCH_PARALLELISM: int = 1

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v: Any) -> str:
        return str(v).upper()

    @field_validator(
        "DCD_TEMPERATURE", "FSCORE_THRESHOLD", "EMD_APPROX_EPSILON", "DIVERGENCE_FACTOR",
    )
    @classmethod
    def require_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be positive")
        return v

    model_config = SettingsConfigDict(
        case_sensitive=True,
        extra="ignore",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # Лише явні значення: змінні оточення та .env не читаються
        return (init_settings,)


def load_settings(config_path: Optional[Path] = None, **overrides: Any) -> Settings:
    """Налаштування з JSON-файлу; явні значення (прапорці CLI) мають пріоритет"""
    values: dict[str, Any] = {}

    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise DataFileException(f"Config file not found: {path}")
        try:
            values.update(JsonConfigSettingsSource(Settings, json_file=path)())
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise DataFileException(f"Config file {path} is not valid JSON: {e}")

    values.update({k: v for k, v in overrides.items() if v is not None})
    return Settings(**values)


settings = Settings()


def apply_settings(new: Settings) -> None:
    """Оновлення спільного екземпляра на місці (модулі тримають посилання на нього)"""
    for name in Settings.model_fields:
        setattr(settings, name, getattr(new, name))
