import logging
from enum import Enum

import numpy as np

from fcdkit.core.exceptions import ValidationException
from fcdkit.models import PointCloud

logger = logging.getLogger(__name__)


class SamplingMethod(str, Enum):
    RANDOM = "random"
    FARTHEST_POINT = "farthest-point"


def farthest_point_indices(points: np.ndarray, n: int) -> np.ndarray:
    """Індекси FPS у порядку вибору; старт з точки 0, рівність - найменший індекс"""
    selected = np.empty(n, dtype=np.intp)
    selected[0] = 0
    min_sq = np.sum((points - points[0]) ** 2, axis=1)
    min_sq[0] = -1.0
    for i in range(1, n):
        nxt = int(np.argmax(min_sq))
        selected[i] = nxt
        np.minimum(min_sq, np.sum((points - points[nxt]) ** 2, axis=1), out=min_sq)
        # Вибрана точка не може бути обрана вдруге, її дублікати можуть
        min_sq[nxt] = -1.0
    return selected


def subsample(
    cloud: PointCloud,
    n: int,
    method: SamplingMethod = SamplingMethod.FARTHEST_POINT,
    seed: int = 0,
) -> PointCloud:
    """Вибірка n точок з хмари

    random - детермінована для seed, точки в порядку вхідної хмари;
    farthest-point - у порядку вибору, seed не використовується.
    """
    if not 1 <= n <= len(cloud):
        raise ValidationException(
            f"Subsample size must be in [1, {len(cloud)}], got {n}"
        )

    method = SamplingMethod(method)
    if method == SamplingMethod.RANDOM:
        rng = np.random.default_rng(seed)
        indices = np.sort(rng.choice(len(cloud), size=n, replace=False))
    else:
        indices = farthest_point_indices(cloud.points, n)

    return cloud.subset(indices)


def planar_grid(rows: int, cols: int, spacing: float) -> PointCloud:
    """Рівномірна сітка rows x cols у площині, рядок за рядком від (0, 0)"""
    if rows < 1 or cols < 1 or not spacing > 0:
        raise ValidationException("Grid needs positive rows, cols and spacing")
    ys, xs = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    points = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64) * spacing
    return PointCloud(points)
