"""FCD: цільова функція, аналітичні градієнти, розклади ваг та багатостадійні втрати"""
import logging
import math
from typing import Iterator, List, Optional, Tuple

import numpy as np

from fcdkit.core import counters
from fcdkit.core.config import settings
from fcdkit.core.exceptions import ValidationException
from fcdkit.models import GradientField, PointCloud, StageLossSpec
from fcdkit.schemas.metrics import DistanceOrder
from fcdkit.schemas.objective import FcdWeights, ScheduleKind, ScheduleSpec, UncertaintyState
from fcdkit.services.metrics import cd_global, cd_local, dcd_terms, nearest_pairs

logger = logging.getLogger(__name__)


def fcd_terms(P: PointCloud, G: PointCloud, r: DistanceOrder = DistanceOrder.FIRST) -> Tuple[float, float]:
    """(локальний, глобальний) доданки Chamfer"""
    return cd_local(P, G, r), cd_global(P, G, r)


def fcd(P: PointCloud, G: PointCloud, weights: FcdWeights, r: DistanceOrder = DistanceOrder.FIRST) -> float:
    """alpha * CD_local + beta * CD_global"""
    counters.metric_evaluations_total.labels(metric="fcd").inc()
    local, global_ = fcd_terms(P, G, r)
    return weights.alpha * local + weights.beta * global_


def distance_gradient(p: np.ndarray, g: np.ndarray, r: DistanceOrder) -> np.ndarray:
    """Градієнт d^r(p, g) по p для кожного рядка

    r=1: (p - g) / |p - g|, нульовий вектор для збіжних точок; r=2: 2 (p - g).
    """
    diff = p - g
    if DistanceOrder(r) == DistanceOrder.SECOND:
        return 2.0 * diff
    norm = np.sqrt(np.sum(diff ** 2, axis=-1, keepdims=True))
    return np.divide(diff, norm, out=np.zeros_like(diff), where=norm > 0)


def _split_gradient(
    P: PointCloud, G: PointCloud, r: DistanceOrder,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Локальна частина (/|P|), глобальна частина (/|G|, зібрана на p) та локальні призначення"""
    idx_pg, _ = nearest_pairs(P, G)
    idx_gp, _ = nearest_pairs(G, P)

    local = distance_gradient(P.points, G.points[idx_pg], r) / len(P)

    contributions = distance_gradient(P.points[idx_gp], G.points, r) / len(G)
    scattered = np.zeros_like(P.points)
    np.add.at(scattered, idx_gp, contributions)
    return local, scattered, idx_pg


def fcd_gradient_with_assignment(
    P: PointCloud, G: PointCloud, weights: FcdWeights, r: DistanceOrder = DistanceOrder.FIRST,
) -> Tuple[GradientField, np.ndarray]:
    local, scattered, idx_pg = _split_gradient(P, G, r)
    return GradientField(weights.alpha * local + weights.beta * scattered), idx_pg


def fcd_gradient(
    P: PointCloud, G: PointCloud, weights: FcdWeights, r: DistanceOrder = DistanceOrder.FIRST,
) -> GradientField:
    """Субградієнт FCD по координатах P при зафіксованих призначеннях найближчих сусідів"""
    gradient, _ = fcd_gradient_with_assignment(P, G, weights, r)
    return gradient


def dcd_gradient_with_assignment(
    P: PointCloud, G: PointCloud, temperature: Optional[float] = None,
) -> Tuple[GradientField, np.ndarray]:
    temperature = settings.DCD_TEMPERATURE if temperature is None else temperature
    idx_pg, d_pg, n_pg, idx_gp, d_gp, n_gp = dcd_terms(P, G, temperature)

    coeff_p = 0.5 / len(P) * temperature * np.exp(-temperature * d_pg) / n_pg
    local = coeff_p[:, None] * distance_gradient(P.points, G.points[idx_pg], DistanceOrder.FIRST)

    coeff_g = 0.5 / len(G) * temperature * np.exp(-temperature * d_gp) / n_gp
    contributions = coeff_g[:, None] * distance_gradient(P.points[idx_gp], G.points, DistanceOrder.FIRST)
    scattered = np.zeros_like(P.points)
    np.add.at(scattered, idx_gp, contributions)
    return GradientField(local + scattered), idx_pg


def dcd_gradient(P: PointCloud, G: PointCloud, temperature: Optional[float] = None) -> GradientField:
    """Субградієнт DCD по P; лічильники влучань зафіксовані"""
    gradient, _ = dcd_gradient_with_assignment(P, G, temperature)
    return gradient


def schedule_weights(
    spec: ScheduleSpec, epoch: int, state: Optional[UncertaintyState] = None,
) -> FcdWeights:
    """Ваги (alpha, beta) для епохи; alpha завжди дорівнює tau"""
    if not 0 <= epoch <= spec.total_epochs:
        raise ValidationException(
            f"Epoch {epoch} outside schedule range [0, {spec.total_epochs}]"
        )

    theta, tau = spec.theta, spec.tau
    t, T = spec.transition_epoch, spec.total_epochs

    if spec.kind == ScheduleKind.UNCERTAINTY:
        if state is None:
            raise ValidationException("Uncertainty schedule requires an UncertaintyState")
        return state.weights()

    if spec.kind == ScheduleKind.STATIC:
        beta = theta
    elif spec.kind == ScheduleKind.STAIR:
        beta = theta if epoch < t else tau
    elif spec.kind == ScheduleKind.LINEAR:
        beta = max(tau, theta - (epoch / T) * (theta - tau))
    elif spec.kind == ScheduleKind.ABRIDGED_LINEAR:
        beta = theta if epoch <= t else max(tau, theta - ((epoch - t) / (T - t)) * (theta - tau))
    else:
        beta = (theta - tau) * math.exp(-epoch / spec.sigma) + tau

    return FcdWeights(alpha=tau, beta=beta)


def schedule_table(spec: ScheduleSpec) -> Iterator[Tuple[int, float, float]]:
    """(epoch, alpha, beta) для епох 0..T"""
    if not spec.is_preset:
        raise ValidationException(
            f"Schedule '{spec.kind.value}' has no fixed table; its weights follow the training losses"
        )
    for epoch in range(spec.total_epochs + 1):
        weights = schedule_weights(spec, epoch)
        yield epoch, weights.alpha, weights.beta


def uncertainty_loss(
    local_loss: float, global_loss: float, state: UncertaintyState,
) -> Tuple[float, Tuple[float, float]]:
    """exp(-s_l) L_l + exp(-s_g) L_g + s_l + s_g та похідні по (s_l, s_g)"""
    if local_loss < 0 or global_loss < 0:
        raise ValidationException("Losses must be non-negative")
    w_local = math.exp(-state.s_local)
    w_global = math.exp(-state.s_global)
    total = w_local * local_loss + w_global * global_loss + state.s_local + state.s_global
    gradients = (-w_local * local_loss + 1.0, -w_global * global_loss + 1.0)
    return total, gradients


def multi_stage_loss(
    spec: StageLossSpec,
    schedule: ScheduleSpec,
    r: DistanceOrder = DistanceOrder.FIRST,
    state: Optional[UncertaintyState] = None,
) -> float:
    """Сума FCD грубих стадій (статичні ваги tau, theta) та фінальної стадії за розкладом"""
    coarse_weights = schedule.static_weights
    total = math.fsum(fcd(pred, target, coarse_weights, r) for pred, target in spec.coarse_pairs)
    fine_pred, fine_target = spec.fine_pair
    return total + fcd(fine_pred, fine_target, schedule_weights(schedule, spec.epoch, state), r)


def multi_stage_gradient(
    spec: StageLossSpec,
    schedule: ScheduleSpec,
    r: DistanceOrder = DistanceOrder.FIRST,
    state: Optional[UncertaintyState] = None,
) -> Tuple[List[GradientField], GradientField]:
    """Градієнти multi_stage_loss: по одному полю на кожну грубу хмару та фінальне"""
    coarse_weights = schedule.static_weights
    coarse = [fcd_gradient(pred, target, coarse_weights, r) for pred, target in spec.coarse_pairs]
    fine_pred, fine_target = spec.fine_pair
    fine = fcd_gradient(fine_pred, fine_target, schedule_weights(schedule, spec.epoch, state), r)
    return coarse, fine
