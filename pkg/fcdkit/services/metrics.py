"""Метрики подібності хмар точок: Chamfer, DCD, EMD, F-Score, Hausdorff, P2F, Fidelity"""
import logging
import math
from typing import Callable, Iterable, Optional, Tuple

import numpy as np

from fcdkit.core import counters
from fcdkit.core.config import settings
from fcdkit.core.exceptions import ValidationException
from fcdkit.models import PointCloud, TriangleMesh, require_non_empty, require_same_dim
from fcdkit.schemas.metrics import DISTANCE_METRICS, METRIC_COLUMNS, DistanceOrder, MetricReport
from fcdkit.services.cloud_index import NNIndex
from fcdkit.services.emd import emd_approx, emd_exact
from fcdkit.services.mesh import mean_point_to_mesh
from fcdkit.services.sampling import SamplingMethod, subsample

logger = logging.getLogger(__name__)


def _mean(values: np.ndarray) -> float:
    return math.fsum(values) / len(values)


def nearest_pairs(source: PointCloud, target: PointCloud) -> Tuple[np.ndarray, np.ndarray]:
    """Для кожної точки source - індекс найближчої точки target та відстань"""
    require_non_empty(source, target)
    require_same_dim(source, target)
    return NNIndex(target).query(source.points)


def directional_distances(
    source: PointCloud, target: PointCloud, r: DistanceOrder = DistanceOrder.FIRST,
) -> np.ndarray:
    _, dist = nearest_pairs(source, target)
    return dist if DistanceOrder(r) == DistanceOrder.FIRST else dist ** 2


def cd_local(P: PointCloud, G: PointCloud, r: DistanceOrder = DistanceOrder.FIRST) -> float:
    """Середня відстань від передбачених точок до найближчих цільових"""
    return _mean(directional_distances(P, G, r))


def cd_global(P: PointCloud, G: PointCloud, r: DistanceOrder = DistanceOrder.FIRST) -> float:
    """Середня відстань від цільових точок до найближчих передбачених"""
    return _mean(directional_distances(G, P, r))


def chamfer_l1(P: PointCloud, G: PointCloud) -> float:
    counters.metric_evaluations_total.labels(metric="cd_l1").inc()
    return 0.5 * (cd_local(P, G, DistanceOrder.FIRST) + cd_global(P, G, DistanceOrder.FIRST))


def chamfer_l2(P: PointCloud, G: PointCloud) -> float:
    counters.metric_evaluations_total.labels(metric="cd_l2").inc()
    return cd_local(P, G, DistanceOrder.SECOND) + cd_global(P, G, DistanceOrder.SECOND)


def _require_positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ValidationException(f"{name} must be positive, got {value}")


def dcd_terms(
    P: PointCloud, G: PointCloud, temperature: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Складові DCD: (idx, dist, count) для напрямків P->G та G->P"""
    _require_positive("temperature", temperature)
    idx_pg, d_pg = nearest_pairs(P, G)
    idx_gp, d_gp = nearest_pairs(G, P)
    # Кількість точок P, для яких кожна g найближча, і навпаки
    hits_g = np.bincount(idx_pg, minlength=len(G))
    hits_p = np.bincount(idx_gp, minlength=len(P))
    return idx_pg, d_pg, hits_g[idx_pg], idx_gp, d_gp, hits_p[idx_gp]


def dcd(P: PointCloud, G: PointCloud, temperature: Optional[float] = None) -> float:
    """Density-aware Chamfer Distance, значення в [0, 1]"""
    temperature = settings.DCD_TEMPERATURE if temperature is None else temperature
    _, d_pg, n_pg, _, d_gp, n_gp = dcd_terms(P, G, temperature)
    counters.metric_evaluations_total.labels(metric="dcd").inc()
    term_p = 1.0 - np.exp(-temperature * d_pg) / n_pg
    term_g = 1.0 - np.exp(-temperature * d_gp) / n_gp
    return 0.5 * (_mean(term_p) + _mean(term_g))


def precision_recall(P: PointCloud, G: PointCloud, threshold: float) -> Tuple[float, float]:
    _require_positive("threshold", threshold)
    d_pg = directional_distances(P, G)
    d_gp = directional_distances(G, P)
    precision = float(np.count_nonzero(d_pg < threshold)) / len(P)
    recall = float(np.count_nonzero(d_gp < threshold)) / len(G)
    return precision, recall


def fscore(P: PointCloud, G: PointCloud, threshold: Optional[float] = None) -> float:
    threshold = settings.FSCORE_THRESHOLD if threshold is None else threshold
    precision, recall = precision_recall(P, G, threshold)
    counters.metric_evaluations_total.labels(metric="fscore").inc()
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def hausdorff(P: PointCloud, G: PointCloud) -> float:
    counters.metric_evaluations_total.labels(metric="hausdorff").inc()
    return float(max(directional_distances(P, G).max(), directional_distances(G, P).max()))


def point_to_mesh(P: PointCloud, mesh: TriangleMesh, chunk_size: Optional[int] = None) -> float:
    counters.metric_evaluations_total.labels(metric="p2f").inc()
    return mean_point_to_mesh(P, mesh, chunk_size)


def fidelity(input_cloud: PointCloud, output_cloud: PointCloud) -> float:
    """Середня відстань від точок часткового входу до найближчих точок результату"""
    counters.metric_evaluations_total.labels(metric="fidelity").inc()
    return cd_local(input_cloud, output_cloud, DistanceOrder.FIRST)


def _emd_for_report(P: PointCloud, G: PointCloud, allow_approx: bool) -> Optional[float]:
    if len(P) != len(G):
        if not allow_approx:
            logger.warning(f"EMD skipped: cloud sizes differ ({len(P)} vs {len(G)})")
            return None
        size = min(len(P), len(G))
        logger.info(f"EMD on farthest-point subsamples of {size} points")
        P = subsample(P, size, SamplingMethod.FARTHEST_POINT)
        G = subsample(G, size, SamplingMethod.FARTHEST_POINT)

    if len(P) <= settings.EMD_EXACT_MAX_POINTS:
        return emd_exact(P, G)
    if allow_approx:
        return emd_approx(P, G)
    logger.warning(
        f"EMD skipped: {len(P)} points exceed the exact solver cap of {settings.EMD_EXACT_MAX_POINTS}"
    )
    return None


def _guarded(name: str, compute: Callable[[], Optional[float]]) -> Optional[float]:
    """Помилки валідації отримують префікс з назвою метрики"""
    try:
        return compute()
    except ValidationException as e:
        raise ValidationException(f"{name}: {e.detail}")


def evaluate(
    P: PointCloud,
    G: PointCloud,
    *,
    mesh: Optional[TriangleMesh] = None,
    partial: Optional[PointCloud] = None,
    metrics: Optional[Iterable[str]] = None,
    temperature: Optional[float] = None,
    threshold: Optional[float] = None,
    emd_approx_allowed: bool = False,
    scale: float = 1.0,
) -> MetricReport:
    """Обчислення набору метрик для пари хмар

    p2f рахується лише з сіткою, fidelity - лише з частковим входом.
    """
    requested = list(metrics) if metrics is not None else list(METRIC_COLUMNS)
    unknown = [name for name in requested if name not in METRIC_COLUMNS]
    if unknown:
        raise ValidationException(f"Unknown metrics: {', '.join(unknown)}")
    _require_positive("scale", scale)

    calculators = {
        "cd_l1": lambda: chamfer_l1(P, G),
        "cd_l2": lambda: chamfer_l2(P, G),
        "dcd": lambda: dcd(P, G, temperature),
        "emd": lambda: _emd_for_report(P, G, emd_approx_allowed),
        "fscore": lambda: fscore(P, G, threshold),
        "hausdorff": lambda: hausdorff(P, G),
        "p2f": lambda: point_to_mesh(P, mesh) if mesh is not None else None,
        "fidelity": lambda: fidelity(partial, P) if partial is not None else None,
    }

    values = {}
    for name in requested:
        value = _guarded(name, calculators[name])
        if value is not None and name in DISTANCE_METRICS:
            value *= scale
        values[name] = value

    logger.debug(f"Metrics evaluated: {', '.join(requested)}")
    return MetricReport(**values)
