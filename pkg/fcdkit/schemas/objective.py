import json
import math
from enum import Enum
from typing import Any, Dict, Mapping, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fcdkit.core.config import settings
from fcdkit.core.exceptions import ValidationException


class FcdWeights(BaseModel):
    """Ваги (alpha, beta): локальне прилягання та глобальне покриття"""
    alpha: float = Field(..., gt=0)
    beta: float = Field(..., gt=0)

    model_config = ConfigDict(frozen=True)

    @field_validator("alpha", "beta")
    @classmethod
    def require_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("weight must be finite")
        return v

    def scaled(self, factor: float) -> "FcdWeights":
        return FcdWeights(alpha=self.alpha * factor, beta=self.beta * factor)

    def as_tuple(self) -> Tuple[float, float]:
        return self.alpha, self.beta


class ScheduleKind(str, Enum):
    STATIC = "static"
    STAIR = "stair"
    LINEAR = "linear"
    ABRIDGED_LINEAR = "abridged-linear"
    EXPONENTIAL = "exponential"
    UNCERTAINTY = "uncertainty"


PRESET_KINDS = (
    ScheduleKind.STATIC,
    ScheduleKind.STAIR,
    ScheduleKind.LINEAR,
    ScheduleKind.ABRIDGED_LINEAR,
    ScheduleKind.EXPONENTIAL,
)

# Ключі плаского формату key=value
SCHEDULE_KEYS = ("kind", "theta", "tau", "t", "T", "sigma")


class ScheduleSpec(BaseModel):
    """Параметри розкладу ваг: межі theta/tau, епоха переходу t, кількість епох T, швидкість згасання sigma"""
    kind: ScheduleKind = ScheduleKind.STATIC
    theta: float = Field(default_factory=lambda: settings.SCHEDULE_THETA)
    tau: float = Field(default_factory=lambda: settings.SCHEDULE_TAU)
    transition_epoch: int = Field(
        default_factory=lambda: settings.SCHEDULE_TRANSITION_EPOCH, alias="t",
    )
    total_epochs: int = Field(
        default_factory=lambda: settings.SCHEDULE_TOTAL_EPOCHS, alias="T",
    )
    sigma: float = Field(default_factory=lambda: settings.SCHEDULE_SIGMA)

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def validate_bounds(self) -> "ScheduleSpec":
        if not (math.isfinite(self.theta) and math.isfinite(self.tau)):
            raise ValueError("theta and tau must be finite")
        if not self.theta > self.tau > 0:
            raise ValueError(f"Schedule bounds require theta > tau > 0, got theta={self.theta}, tau={self.tau}")
        if not 0 < self.transition_epoch < self.total_epochs:
            raise ValueError(
                f"Schedule epochs require 0 < t < T, got t={self.transition_epoch}, T={self.total_epochs}"
            )
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"Schedule decay rate sigma must be positive, got {self.sigma}")
        return self

    @property
    def is_preset(self) -> bool:
        return self.kind in PRESET_KINDS

    @property
    def static_weights(self) -> FcdWeights:
        """Статичні ваги (tau, theta) для грубих стадій"""
        return FcdWeights(alpha=self.tau, beta=self.theta)

    @classmethod
    def from_key_values(cls, source: Union[str, Mapping[str, Any]]) -> "ScheduleSpec":
        """Розбір формату key=value (рядки або коми) чи JSON-об'єкта"""
        if isinstance(source, Mapping):
            return cls.model_validate(dict(source))

        text = source.strip()
        if text.startswith("{"):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as e:
                raise ValidationException(f"Schedule is not valid JSON: {e}")
            return cls.model_validate(data)

        values: Dict[str, str] = {}
        for chunk in text.replace(",", "\n").splitlines():
            chunk = chunk.strip()
            if not chunk or chunk.startswith("#"):
                continue
            if "=" not in chunk:
                raise ValidationException(f"Expected key=value, got '{chunk}'")
            key, value = (part.strip() for part in chunk.split("=", 1))
            if key not in SCHEDULE_KEYS:
                raise ValidationException(f"Unknown schedule key '{key}'")
            values[key] = value
        return cls.model_validate(values)

    def to_key_values(self) -> str:
        data = self.model_dump(by_alias=True, mode="json")
        return "".join(f"{key}={data[key]}\n" for key in SCHEDULE_KEYS)


class UncertaintyState(BaseModel):
    """Логарифми дисперсій для локального та глобального доданків"""
    s_local: float = 0.0
    s_global: float = 0.0

    model_config = ConfigDict(frozen=True)

    @field_validator("s_local", "s_global")
    @classmethod
    def require_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("log-variance state must be finite")
        return v

    @classmethod
    def from_bounds(cls, theta: float, tau: float) -> "UncertaintyState":
        """Початкові ефективні ваги: tau для локального, theta для глобального"""
        return cls(s_local=-math.log(tau), s_global=-math.log(theta))

    def weights(self) -> FcdWeights:
        return FcdWeights(alpha=math.exp(-self.s_local), beta=math.exp(-self.s_global))

    def stepped(self, gradients: Tuple[float, float], step_size: float) -> "UncertaintyState":
        return UncertaintyState(
            s_local=self.s_local - step_size * gradients[0],
            s_global=self.s_global - step_size * gradients[1],
        )
