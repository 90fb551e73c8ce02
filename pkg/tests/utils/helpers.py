"""Допоміжні функції та оракули повного перебору для тестів"""
import csv
import itertools
import math
from pathlib import Path
from typing import Callable, Iterable, List, Sequence, Tuple

import numpy as np

from fcdkit.models import PointCloud
from fcdkit.services.cloud_index import euclidean


def brute_force_nearest(points: np.ndarray, q: np.ndarray) -> Tuple[int, float]:
    """Повний перебір: найменший індекс серед рівних відстаней"""
    distances = euclidean(points, np.asarray(q, dtype=np.float64))
    index = int(np.argmin(distances))
    return index, float(distances[index])


def brute_force_directional(source: PointCloud, target: PointCloud) -> np.ndarray:
    """Відстань кожної точки source до найближчої точки target подвійним циклом"""
    return np.array([brute_force_nearest(target.points, p)[1] for p in source.points])


def brute_force_chamfer_l1(P: PointCloud, G: PointCloud) -> float:
    d_pg = brute_force_directional(P, G)
    d_gp = brute_force_directional(G, P)
    return 0.5 * (math.fsum(d_pg) / len(P) + math.fsum(d_gp) / len(G))


def permutation_emd(P: PointCloud, G: PointCloud) -> float:
    """Мінімум середньої вартості по всіх перестановках"""
    n = len(P)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = math.fsum(float(euclidean(P.points[i], G.points[j])) for i, j in enumerate(perm))
        best = min(best, cost / n)
    return best


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    """Чисельний градієнт центральними різницями"""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        forward = x.copy()
        backward = x.copy()
        forward[index] += step
        backward[index] -= step
        grad[index] = (f(forward) - f(backward)) / (2 * step)
    return grad


def well_separated_cloud(n: int, dim: int, seed: int, min_gap: float = 0.05) -> PointCloud:
    """Хмара з попарними відстанями не менше min_gap (відбір з відкиданням)"""
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < n:
        candidate = rng.uniform(-1.0, 1.0, size=dim)
        if all(np.linalg.norm(candidate - p) >= min_gap for p in points):
            points.append(candidate)
    return PointCloud(np.array(points))


def write_points(path: Path, rows: Iterable[Sequence[float]]) -> Path:
    """Записує XYZ-файл з рядків координат"""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")
    return path


def read_csv_rows(path: Path) -> List[List[str]]:
    """Рядки CSV без коментарів (# ...); перший рядок - заголовок"""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return [row for row in csv.reader(lines)]
