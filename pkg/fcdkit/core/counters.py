from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

# Окремий registry: лічильники процесу, без HTTP-експорту
registry = CollectorRegistry()

nn_queries_total = Counter(
    "fcdkit_nn_queries_total",
    "Total number of nearest-neighbor queries answered by NNIndex",
    registry=registry,
)

metric_evaluations_total = Counter(
    "fcdkit_metric_evaluations_total",
    "Number of metric evaluations",
    ["metric"],
    registry=registry,
)

optimizer_steps_total = Counter(
    "fcdkit_optimizer_steps_total",
    "Number of descent steps taken",
    ["objective"],
    registry=registry,
)

assignment_switches_total = Counter(
    "fcdkit_assignment_switches_total",
    "Number of local nearest-target switches observed during descent",
    registry=registry,
)

optimization_seconds = Histogram(
    "fcdkit_optimization_seconds",
    "Wall-clock duration of optimization runs",
    buckets=[0.1, 0.5, 1.0, 5.0, 15.0, 60.0, 300.0],
    registry=registry,
)


def export_textfile(path: Path) -> None:
    """Запис registry у форматі textfile collector"""
    write_to_textfile(str(path), registry)
