from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from fcdkit.core.config import settings
from fcdkit.schemas.metrics import DistanceOrder
from fcdkit.schemas.objective import FcdWeights, ScheduleSpec, UncertaintyState


class UpdateRule(str, Enum):
    PLAIN = "plain"
    MOMENTUM = "momentum"


class OptimizerConfig(BaseModel):
    steps: int = Field(1000, ge=1)
    step_size: float = Field(1e-3, gt=0)  # eta
    update_rule: UpdateRule = UpdateRule.PLAIN
    momentum_coeff: float = Field(0.9, ge=0, lt=1)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    record_every: int = Field(1, ge=1)
    steps_per_epoch: int = Field(1, ge=1)
    state_step_size: float = Field(1e-3, gt=0)
    divergence_factor: Optional[float] = Field(None, gt=1)
    snapshot_points: Optional[int] = Field(None, ge=1)

    model_config = ConfigDict(frozen=True)


class ObjectiveKind(str, Enum):
    CD_L1 = "cd-l1"
    CD_L2 = "cd-l2"
    FCD = "fcd"
    DCD_LOSS = "dcd-loss"


class ObjectiveSpec(BaseModel):
    """Цільова функція для прямої оптимізації координат"""
    kind: ObjectiveKind
    weights: Optional[FcdWeights] = None
    schedule: Optional[ScheduleSpec] = None
    r: Optional[DistanceOrder] = None
    temperature: Optional[float] = Field(None, gt=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_kind(self) -> "ObjectiveSpec":
        if self.kind != ObjectiveKind.FCD and (self.weights is not None or self.schedule is not None):
            raise ValueError(f"Objective '{self.kind.value}' takes no weights or schedule")
        if self.kind == ObjectiveKind.FCD and self.weights is not None and self.schedule is not None:
            raise ValueError("Objective 'fcd' takes either fixed weights or a schedule, not both")
        if self.kind == ObjectiveKind.CD_L1 and self.r not in (None, DistanceOrder.FIRST):
            raise ValueError("Objective 'cd-l1' uses distance order l1")
        if self.kind == ObjectiveKind.CD_L2 and self.r not in (None, DistanceOrder.SECOND):
            raise ValueError("Objective 'cd-l2' uses distance order l2")
        if self.kind == ObjectiveKind.DCD_LOSS and self.r not in (None, DistanceOrder.FIRST):
            raise ValueError("Objective 'dcd-loss' uses Euclidean distances")
        if self.kind != ObjectiveKind.DCD_LOSS and self.temperature is not None:
            raise ValueError("Only 'dcd-loss' takes a temperature")
        return self

    @property
    def order(self) -> DistanceOrder:
        if self.kind == ObjectiveKind.CD_L2:
            return DistanceOrder.SECOND
        if self.kind == ObjectiveKind.FCD and self.r is not None:
            return self.r
        return DistanceOrder.FIRST


class HierarchySpec(BaseModel):
    """Груба хмара N_c точок, кожна породжує m дочірніх точок через вільні зміщення"""
    coarse_count: int = Field(..., ge=1)
    children_per_coarse: int = Field(..., ge=1)
    offset_init_scale: float = Field(1e-3, ge=0)
    freeze_offsets: bool = False

    model_config = ConfigDict(frozen=True)

    @property
    def fine_count(self) -> int:
        return self.coarse_count * self.children_per_coarse


TRACE_COLUMNS = ["epoch", "objective", "alpha", "beta", "cd_l1", "dcd", "emd", "grad_max"]


class TraceRow(BaseModel):
    epoch: int = Field(..., ge=0)
    objective: float
    alpha: float
    beta: float
    cd_l1: float
    dcd: float
    emd: float
    grad_max: float
    switches: int = 0

    model_config = ConfigDict(frozen=True)

    def csv_row(self) -> list:
        return [getattr(self, name) for name in TRACE_COLUMNS]


class OptimizationTrace(BaseModel):
    rows: List[TraceRow] = Field(default_factory=list)
    final_state: Optional[UncertaintyState] = None
    total_switches: int = 0

    @model_validator(mode="after")
    def validate_epochs(self) -> "OptimizationTrace":
        epochs = [row.epoch for row in self.rows]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ValueError("Trace epochs must be strictly increasing")
        return self

    @property
    def last(self) -> TraceRow:
        return self.rows[-1]

    def csv_rows(self) -> List[list]:
        return [row.csv_row() for row in self.rows]
