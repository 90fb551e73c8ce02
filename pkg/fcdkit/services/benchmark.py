"""Канонічний бенчмарк: кластеризована ініціалізація проти рівномірної сітки"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from fcdkit.core.config import settings
from fcdkit.core.exceptions import ValidationException
from fcdkit.models import PointCloud
from fcdkit.schemas.descent import ObjectiveKind, ObjectiveSpec, OptimizationTrace, OptimizerConfig
from fcdkit.schemas.metrics import DistanceOrder, MetricReport
from fcdkit.schemas.objective import FcdWeights, ScheduleKind, ScheduleSpec
from fcdkit.services.descent import optimize
from fcdkit.services.metrics import dcd, evaluate
from fcdkit.services.sampling import planar_grid

logger = logging.getLogger(__name__)

GRID_SIDE = 8
CLUSTER_SIGMA = 0.05
BENCHMARK_STEPS = 2000
BENCHMARK_STEP_SIZE = 0.05
BENCHMARK_ORDER = DistanceOrder.FIRST
# DCD з T=1000 насичується на сітці з кроком 1/7; T=20 відповідає кроку сітки
BENCHMARK_DCD_TEMPERATURE = 20.0

# Колонки підсумкової таблиці абляції
SUMMARY_COLUMNS = ["arm", "cd_l1", "cd_l2", "dcd", "dcd_grid", "emd", "fscore", "hausdorff"]
REPORT_COLUMNS = [name for name in SUMMARY_COLUMNS[1:] if name != "dcd_grid"]


def clustered_grid(seed: int = 42) -> Tuple[PointCloud, PointCloud]:
    """(init, target): 64 точки N((0,0), 0.05^2) та сітка 8x8 на одиничному квадраті"""
    target = planar_grid(GRID_SIDE, GRID_SIDE, 1.0 / (GRID_SIDE - 1))
    rng = np.random.default_rng(seed)
    init = PointCloud(rng.normal(0.0, CLUSTER_SIGMA, size=(GRID_SIDE * GRID_SIDE, 2)))
    return init, target


def _fcd_arm(kind: ScheduleKind) -> Tuple[ObjectiveSpec, Optional[ScheduleSpec]]:
    return (
        ObjectiveSpec(kind=ObjectiveKind.FCD, r=BENCHMARK_ORDER),
        ScheduleSpec(kind=kind),
    )


BENCHMARK_ARMS: Dict[str, Tuple[ObjectiveSpec, Optional[ScheduleSpec]]] = {
    # Базова лінія з тим самим масштабом: fcd з (1, 1)
    "cd": (
        ObjectiveSpec(
            kind=ObjectiveKind.FCD, weights=FcdWeights(alpha=1.0, beta=1.0), r=BENCHMARK_ORDER,
        ),
        None,
    ),
    "fcd-static": _fcd_arm(ScheduleKind.STATIC),
    "fcd-stair": _fcd_arm(ScheduleKind.STAIR),
    "fcd-linear": _fcd_arm(ScheduleKind.LINEAR),
    "fcd-abridged-linear": _fcd_arm(ScheduleKind.ABRIDGED_LINEAR),
    "fcd-exponential": _fcd_arm(ScheduleKind.EXPONENTIAL),
    "fcd-uncertainty": _fcd_arm(ScheduleKind.UNCERTAINTY),
    "dcd-loss": (ObjectiveSpec(kind=ObjectiveKind.DCD_LOSS, temperature=BENCHMARK_DCD_TEMPERATURE), None),
}
@dataclass
class ArmResult:
    arm: str
    final: PointCloud
    trace: OptimizationTrace
    report: MetricReport
    dcd_grid: float
    seed: int = 42

    def value(self, name: str) -> Optional[float]:
        if name == "dcd_grid":
            return self.dcd_grid
        return getattr(self.report, name)

    def summary_row(self) -> list:
        return [self.arm] + [self.value(name) for name in SUMMARY_COLUMNS[1:]]


def aggregate_columns() -> List[str]:
    columns = ["arm", "trials"]
    for name in SUMMARY_COLUMNS[1:]:
        columns += [f"{name}_mean", f"{name}_std"]
    return columns


def aggregate_results(results: Sequence[ArmResult]) -> List[list]:
    """Середнє та стандартне відхилення (ddof=0) кожної метрики по запусках рукава

    Рядки йдуть у порядку першої появи рукава.
    """
    by_arm: Dict[str, List[ArmResult]] = {}
    for result in results:
        by_arm.setdefault(result.arm, []).append(result)

    rows = []
    for arm, runs in by_arm.items():
        row: list = [arm, len(runs)]
        for name in SUMMARY_COLUMNS[1:]:
            values = [run.value(name) for run in runs]
            if any(value is None for value in values):
                row += [None, None]
                continue
            data = np.asarray(values, dtype=float)
            row += [float(data.mean()), float(data.std())]
        rows.append(row)
    return rows


def benchmark_config(
    seed: int = 42,
    steps: int = BENCHMARK_STEPS,
    step_size: float = BENCHMARK_STEP_SIZE,
    record_every: int = 100,
    schedule: Optional[ScheduleSpec] = None,
) -> OptimizerConfig:
    """Один крок - одна частка епохи: всі кроки покривають T епох розкладу"""
    steps_per_epoch = 1
    if schedule is not None and steps > schedule.total_epochs:
        steps_per_epoch = steps // schedule.total_epochs
    return OptimizerConfig(
        steps=steps,
        step_size=step_size,
        seed=seed,
        record_every=record_every,
        steps_per_epoch=steps_per_epoch,
    )


def run_benchmark_arm(
    arm: str,
    seed: int = 42,
    steps: int = BENCHMARK_STEPS,
    step_size: float = BENCHMARK_STEP_SIZE,
    record_every: int = 100,
) -> ArmResult:
    if arm not in BENCHMARK_ARMS:
        raise ValidationException(
            f"Unknown benchmark arm '{arm}'; expected one of {', '.join(BENCHMARK_ARMS)}"
        )
    objective, schedule = BENCHMARK_ARMS[arm]
    init, target = clustered_grid(seed)
    config = benchmark_config(seed, steps, step_size, record_every, schedule)

    logger.info(f"Benchmark arm '{arm}' started (seed={seed}, steps={steps})")
    final, trace = optimize(init, target, objective, schedule=schedule, config=config)
    report = evaluate(final, target, threshold=settings.FSCORE_THRESHOLD, metrics=REPORT_COLUMNS)
    return ArmResult(
        arm=arm,
        final=final,
        trace=trace,
        report=report,
        dcd_grid=dcd(final, target, BENCHMARK_DCD_TEMPERATURE),
        seed=seed,
    )
