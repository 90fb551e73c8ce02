"""Earth Mover's Distance: точне призначення та наближення Sinkhorn"""
import logging
import math
from enum import Enum

import numpy as np
import ot
from scipy.optimize import linear_sum_assignment

from fcdkit.core import counters
from fcdkit.core.config import settings
from fcdkit.core.exceptions import ValidationException
from fcdkit.models import PointCloud, require_non_empty, require_same_dim
from fcdkit.services.cloud_index import euclidean

logger = logging.getLogger(__name__)

# Ітерацій Sinkhorn на кожному значенні epsilon
INNER_ITERATIONS = 100
# Зупинка за квадратом похибки маргіналів
MARGINAL_TOL = 1e-12


class Reduction(str, Enum):
    MEAN = "mean"
    SUM = "sum"


def _check_pair(P: PointCloud, G: PointCloud) -> int:
    require_non_empty(P, G)
    require_same_dim(P, G)
    if len(P) != len(G):
        raise ValidationException(
            f"EMD needs clouds of equal size, got {len(P)} and {len(G)}"
        )
    return len(P)


def cost_matrix(P: PointCloud, G: PointCloud) -> np.ndarray:
    return euclidean(P.points[:, None, :], G.points[None, :, :])


def _reduce(total: float, n: int, reduction: Reduction) -> float:
    return total / n if Reduction(reduction) == Reduction.MEAN else total


def emd_exact(
    P: PointCloud,
    G: PointCloud,
    reduction: Reduction = Reduction.MEAN,
    max_points: int | None = None,
) -> float:
    """Оптимальне призначення один-до-одного (угорський алгоритм)"""
    n = _check_pair(P, G)
    cap = max_points if max_points is not None else settings.EMD_EXACT_MAX_POINTS
    if cap < 1:
        raise ValidationException(f"max_points must be at least 1, got {cap}")
    if n > cap:
        raise ValidationException(
            f"emd_exact supports at most {cap} points, got {n}; use emd_approx for larger clouds"
        )
    counters.metric_evaluations_total.labels(metric="emd").inc()

    cost = cost_matrix(P, G)
    rows, cols = linear_sum_assignment(cost)
    return _reduce(math.fsum(cost[rows, cols]), n, reduction)


def sinkhorn_plan(cost: np.ndarray, iterations: int, epsilon: float) -> np.ndarray:
    """Транспортний план з рівномірними маргіналами (POT, стабілізований Sinkhorn зі згасанням epsilon)

    Вартість нормується на max(cost), тому epsilon відносний. Результат
    округлюється до допустимого плану з точними маргіналами.
    """
    n = cost.shape[0]
    c_max = float(cost.max())
    if c_max == 0.0:
        return np.eye(n) / n

    marginal = np.full(n, 1.0 / n)
    plan, log = ot.bregman.sinkhorn_epsilon_scaling(
        marginal,
        marginal,
        cost / c_max,
        epsilon,
        numItermax=iterations,
        epsilon0=1.0,
        numInnerItermax=INNER_ITERATIONS,
        stopThr=MARGINAL_TOL,
        log=True,
        warn=False,
    )
    logger.debug(f"Sinkhorn stopped after {log['niter'] + 1} scaling steps")
    return round_to_marginals(np.asarray(plan, dtype=float))


def round_to_marginals(plan: np.ndarray) -> np.ndarray:
    """Проєкція плану на множину планів з рівномірними маргіналами 1/n"""
    n = plan.shape[0]
    mass = 1.0 / n
    row = plan.sum(axis=1)
    plan = plan * np.minimum(1.0, mass / np.where(row > 0, row, 1.0))[:, None]
    col = plan.sum(axis=0)
    plan = plan * np.minimum(1.0, mass / np.where(col > 0, col, 1.0))[None, :]
    err_row = mass - plan.sum(axis=1)
    err_col = mass - plan.sum(axis=0)
    deficit = err_row.sum()
    if deficit > 0:
        plan = plan + np.outer(err_row, err_col) / deficit
    return plan


def emd_approx(
    P: PointCloud,
    G: PointCloud,
    iterations: int | None = None,
    epsilon: float | None = None,
    reduction: Reduction = Reduction.MEAN,
) -> float:
    """Ентропійне наближення EMD; значення не менше за точне"""
    n = _check_pair(P, G)
    iterations = iterations if iterations is not None else settings.EMD_APPROX_ITERATIONS
    epsilon = epsilon if epsilon is not None else settings.EMD_APPROX_EPSILON
    if iterations < 1:
        raise ValidationException(f"emd_approx needs at least one iteration, got {iterations}")
    if not epsilon > 0:
        raise ValidationException(f"emd_approx epsilon must be positive, got {epsilon}")
    counters.metric_evaluations_total.labels(metric="emd").inc()

    cost = cost_matrix(P, G)
    plan = sinkhorn_plan(cost, iterations, epsilon)
    # Повна маса 1, тому середня відстань на точку - <plan, cost>
    mean_cost = math.fsum((plan * cost).ravel())
    return _reduce(mean_cost * n, n, reduction)
