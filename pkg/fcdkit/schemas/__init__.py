from fcdkit.schemas.metrics import DistanceOrder, MetricReport, METRIC_COLUMNS
from fcdkit.schemas.objective import FcdWeights, ScheduleKind, ScheduleSpec, UncertaintyState
from fcdkit.schemas.descent import (
    HierarchySpec,
    ObjectiveKind,
    ObjectiveSpec,
    OptimizationTrace,
    OptimizerConfig,
    TraceRow,
    UpdateRule,
)
from fcdkit.schemas.stalemate import AmbiguityReport, SweepConfig, SweepRow
from fcdkit.schemas.manifest import RunManifest


__all__ = [
    "DistanceOrder",
    "MetricReport",
    "METRIC_COLUMNS",
    "FcdWeights",
    "ScheduleKind",
    "ScheduleSpec",
    "UncertaintyState",
    "HierarchySpec",
    "ObjectiveKind",
    "ObjectiveSpec",
    "OptimizationTrace",
    "OptimizerConfig",
    "TraceRow",
    "UpdateRule",
    "AmbiguityReport",
    "SweepConfig",
    "SweepRow",
    "RunManifest",
]
