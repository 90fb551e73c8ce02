"""Аналіз застою градієнта для конфігурації 2x2 та побудова пари хмар з однаковим CD"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from fcdkit.core.config import settings
from fcdkit.core.exceptions import (
    AmbiguityException,
    ConstructionException,
    NumericalException,
    ValidationException,
)
from fcdkit.models import PointCloud
from fcdkit.schemas.metrics import DistanceOrder
from fcdkit.schemas.objective import FcdWeights
from fcdkit.schemas.stalemate import AmbiguityReport, SweepConfig, SweepRow
from fcdkit.services.metrics import chamfer_l1, chamfer_l2, dcd
from fcdkit.services.objective import distance_gradient, fcd, fcd_gradient
from fcdkit.services.sampling import planar_grid

logger = logging.getLogger(__name__)

CD_WEIGHTS = FcdWeights(alpha=1.0, beta=1.0)
CROSS_CHECK_TOL = 1e-12
MAX_BISECTIONS = 200
MATCH_RTOL = 1e-3
CLUSTER_JITTER = 0.05


@dataclass(frozen=True)
class StalemateGradients:
    """Градієнти в p2: CD та FCD для обох порядків відстані"""
    cd_l1: np.ndarray
    fcd_l1: np.ndarray
    cd_l2: np.ndarray
    fcd_l2: np.ndarray


def _setup(config: SweepConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.array(config.g1, dtype=float), np.array(config.g2, dtype=float), np.array(config.p1, dtype=float)


def _nearest_target(p2: np.ndarray, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
    d1, d2 = math.dist(p2, g1), math.dist(p2, g2)
    if d1 == d2:
        raise AmbiguityException(
            f"p2={tuple(p2)} is equidistant from g1 and g2; the nearest assignment is ambiguous"
        )
    return g1 if d1 < d2 else g2


def _check_matching(p2: np.ndarray, g1: np.ndarray, g2: np.ndarray, p1: np.ndarray) -> None:
    if not math.dist(p2, g1) > math.dist(p1, g1):
        raise ValidationException("p2 must be farther from g1 than p1 is")
    if not math.dist(p2, g2) < math.dist(p1, g2):
        raise ValidationException("p2 must be nearer to g2 than p1 is")


def closed_form_gradients(p2: Tuple[float, float], config: Optional[SweepConfig] = None) -> StalemateGradients:
    """Аналітичні градієнти в p2 для хмар P={p1, p2}, G={g1, g2}

    g1 зіставлена з p1, g2 - з p2; локальний доданок p2 тягне до ближчої з g1, g2.
    """
    config = config or SweepConfig()
    g1, g2, p1 = _setup(config)
    point = np.array(p2, dtype=float)
    _check_matching(point, g1, g2, p1)
    near = _nearest_target(point, g1, g2)

    def assemble(weights: FcdWeights, r: DistanceOrder) -> np.ndarray:
        local = distance_gradient(point, near, r) / 2
        global_ = distance_gradient(point, g2, r) / 2
        return weights.alpha * local + weights.beta * global_

    return StalemateGradients(
        cd_l1=assemble(CD_WEIGHTS, DistanceOrder.FIRST),
        fcd_l1=assemble(config.weights, DistanceOrder.FIRST),
        cd_l2=assemble(CD_WEIGHTS, DistanceOrder.SECOND),
        fcd_l2=assemble(config.weights, DistanceOrder.SECOND),
    )


def closed_form_values(x: float, config: Optional[SweepConfig] = None) -> Tuple[float, float, float, float]:
    """(cd_l1, fcd_l1, cd_l2, fcd_l2) у замкненій формі для p2=(x, 0)"""
    config = config or SweepConfig()
    g1, g2, p1 = _setup(config)
    p2 = np.array([x, 0.0])
    _check_matching(p2, g1, g2, p1)
    near = _nearest_target(p2, g1, g2)

    d11 = math.dist(p1, g1)
    d2n = math.dist(p2, near)
    d22 = math.dist(p2, g2)
    alpha, beta = config.weights.as_tuple()

    local1, global1 = (d11 + d2n) / 2, (d11 + d22) / 2
    local2, global2 = (d11 ** 2 + d2n ** 2) / 2, (d11 ** 2 + d22 ** 2) / 2
    return (
        0.5 * (local1 + global1),
        alpha * local1 + beta * global1,
        local2 + global2,
        alpha * local2 + beta * global2,
    )


def stalemate_clouds(x: float, config: Optional[SweepConfig] = None) -> Tuple[PointCloud, PointCloud]:
    config = config or SweepConfig()
    P = PointCloud(np.array([config.p1, (x, 0.0)], dtype=float))
    G = PointCloud(np.array([config.g1, config.g2], dtype=float))
    return P, G


def _agree(a, b) -> bool:
    return bool(np.all(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) <= CROSS_CHECK_TOL))


def sweep_row(x: float, config: SweepConfig) -> SweepRow:
    P, G = stalemate_clouds(x, config)
    values = (
        chamfer_l1(P, G),
        fcd(P, G, config.weights, DistanceOrder.FIRST),
        chamfer_l2(P, G),
        fcd(P, G, config.weights, DistanceOrder.SECOND),
    )
    gradients = (
        fcd_gradient(P, G, CD_WEIGHTS, DistanceOrder.FIRST).vectors[1],
        fcd_gradient(P, G, config.weights, DistanceOrder.FIRST).vectors[1],
        fcd_gradient(P, G, CD_WEIGHTS, DistanceOrder.SECOND).vectors[1],
        fcd_gradient(P, G, config.weights, DistanceOrder.SECOND).vectors[1],
    )

    closed = closed_form_gradients((x, 0.0), config)
    closed_gradients = (closed.cd_l1, closed.fcd_l1, closed.cd_l2, closed.fcd_l2)
    if not _agree(values, closed_form_values(x, config)):
        raise NumericalException(f"x={x}: metric values disagree with the closed form")
    if not all(_agree(a, b) for a, b in zip(gradients, closed_gradients)):
        raise NumericalException(f"x={x}: gradients disagree with the closed form")

    return SweepRow(
        x=x,
        cd_l1=values[0],
        fcd_l1=values[1],
        cd_l2=values[2],
        fcd_l2=values[3],
        grad_cd_l1_x=float(gradients[0][0]),
        grad_fcd_l1_x=float(gradients[1][0]),
        grad_cd_l2_x=float(gradients[2][0]),
        grad_fcd_l2_x=float(gradients[3][0]),
    )


def sweep(config: Optional[SweepConfig] = None) -> List[SweepRow]:
    """Значення та градієнти CD/FCD для p2=(x, 0) вздовж відрізка g1-g2"""
    config = config or SweepConfig()
    rows = [sweep_row(x, config) for x in config.xs]
    logger.info(f"Sweep finished: {len(rows)} rows, weights={config.weights.as_tuple()}")
    return rows


def sweep_comment(config: SweepConfig) -> str:
    alpha, beta = config.weights.as_tuple()
    return (
        f"setup g1={config.g1} g2={config.g2} p1={config.p1} weights=({alpha}, {beta}); "
        "the equidistant point is excluded; grad_cd_* use weights (1, 1)"
    )


def _grid_shape(n: int) -> Tuple[int, int]:
    rows = max(d for d in range(1, math.isqrt(n) + 1) if n % d == 0)
    return rows, n // rows


def build_ambiguity_pair(
    n: int, seed: int, temperature: Optional[float] = None,
) -> Tuple[PointCloud, PointCloud, PointCloud, AmbiguityReport]:
    """Кластеризована та рівномірна хмари з однаковим CD-l1 відносно сітки G

    Кластеризована: по дві точки в кожному вузлі шахової половини сітки.
    Рівномірна: G + s * J, масштаб s підбирається бісекцією.
    """
    if n < 8 or n % 2:
        raise ValidationException(f"Ambiguity pair needs an even n >= 8, got {n}")
    temperature = settings.DCD_TEMPERATURE if temperature is None else temperature
    if not temperature > 0:
        raise ValidationException(f"temperature must be positive, got {temperature}")

    rows, cols = _grid_shape(n)
    spacing = 1.0 / temperature
    G = planar_grid(rows, cols, spacing)
    ii, jj = np.divmod(np.arange(n), cols)
    anchors = G.points[(ii + jj) % 2 == 0]

    rng = np.random.default_rng(seed)
    cluster_jitter = rng.uniform(-1.0, 1.0, size=(len(anchors), 2, 2)) * CLUSTER_JITTER * spacing
    P_clustered = PointCloud((anchors[:, None, :] + cluster_jitter).reshape(-1, 2))
    J = rng.uniform(-1.0, 1.0, size=(n, 2))

    cd_target = chamfer_l1(P_clustered, G)

    def gap(scale: float) -> float:
        return chamfer_l1(PointCloud(G.points + scale * J), G) - cd_target

    # Пошук інтервалу, на кінцях якого різниця має різні знаки
    low, high = 0.0, 0.125 * spacing
    while gap(high) < 0:
        low, high = high, 2 * high
        if high > 1e6 * spacing:
            raise ConstructionException("Could not bracket the jitter scale matching the clustered CD")

    scale, iterations = high, 0
    for iterations in range(1, MAX_BISECTIONS + 1):
        scale = 0.5 * (low + high)
        diff = gap(scale)
        logger.debug(f"Bisection {iterations}: scale={scale:.6g}, gap={diff:.3e}")
        if abs(diff) <= MATCH_RTOL * cd_target:
            break
        if diff < 0:
            low = scale
        else:
            high = scale
    else:
        raise ConstructionException(
            f"Bisection did not match CD within {MAX_BISECTIONS} iterations"
        )

    P_uniform = PointCloud(G.points + scale * J)
    report = AmbiguityReport(
        n=n,
        seed=seed,
        temperature=temperature,
        spacing=spacing,
        jitter_scale=scale,
        iterations=iterations,
        cd_clustered=cd_target,
        cd_uniform=chamfer_l1(P_uniform, G),
        dcd_clustered=dcd(P_clustered, G, temperature),
        dcd_uniform=dcd(P_uniform, G, temperature),
    )
    logger.info(
        f"Ambiguity pair built: n={n}, cd={report.cd_uniform:.6g}, "
        f"dcd clustered={report.dcd_clustered:.6g} vs uniform={report.dcd_uniform:.6g}"
    )
    return P_clustered, P_uniform, G, report
