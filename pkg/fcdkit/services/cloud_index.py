"""Точний пошук найближчого сусіда на основі cKDTree"""
import logging
from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

from fcdkit.core import counters
from fcdkit.core.exceptions import ValidationException
from fcdkit.models import PointCloud, require_non_empty

logger = logging.getLogger(__name__)

# Відносний та абсолютний допуск, нижче якого дві відстані вважаються рівними
TIE_RTOL = 1e-9
TIE_ATOL = 1e-12


def euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Евклідова відстань по останній осі (єдина формула для індексу та оракулів)"""
    return np.sqrt(np.sum((a - b) ** 2, axis=-1))


class NNIndex:
    """Незмінний індекс над хмарою точок

    Результати збігаються з повним перебором: однакові відстані
    розв'язуються на користь найменшого індексу.
    """

    def __init__(self, cloud: PointCloud):
        require_non_empty(cloud)
        self._source = cloud
        self._tree = cKDTree(cloud.points, balanced_tree=True, compact_nodes=True)

    @property
    def source(self) -> PointCloud:
        return self._source

    def __len__(self) -> int:
        return len(self._source)

    def _as_queries(self, queries: np.ndarray) -> np.ndarray:
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim == 1:
            q = q.reshape(1, -1)
        if q.ndim != 2 or q.shape[1] != self._source.dim:
            raise ValidationException(
                f"Query dimension {q.shape[-1] if q.ndim else 0} does not match index dimension {self._source.dim}"
            )
        if not np.all(np.isfinite(q)):
            raise ValidationException("Query has a non-finite coordinate")
        return q

    def query(self, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Індекси та відстані найближчих точок для масиву запитів (M, D)"""
        q = self._as_queries(queries)
        counters.nn_queries_total.inc(len(q))
        if len(q) == 0:
            return np.zeros(0, dtype=np.intp), np.zeros(0)

        points = self._source.points
        k = min(2, len(points))
        dist, idx = self._tree.query(q, k=k)
        if k == 1:
            best = np.asarray(idx, dtype=np.intp).reshape(-1)
        else:
            best = idx[:, 0].astype(np.intp)
            d1, d2 = dist[:, 0], dist[:, 1]
            tol = TIE_RTOL * d1 + TIE_ATOL
            near_ties = np.flatnonzero(d2 - d1 <= tol)
            if near_ties.size:
                logger.debug(f"Resolving {near_ties.size} near-tie queries by exact rescoring")
            for i in near_ties:
                best[i] = self._resolve_tie(q[i], float(d1[i] + 2 * tol[i]))

        return best, euclidean(q, points[best])

    def _resolve_tie(self, q: np.ndarray, radius: float) -> int:
        candidates = np.sort(np.asarray(self._tree.query_ball_point(q, r=radius), dtype=np.intp))
        exact = euclidean(self._source.points[candidates], q)
        # argmin повертає перше входження, тобто найменший індекс
        return int(candidates[int(np.argmin(exact))])

    def nearest(self, q: np.ndarray) -> Tuple[int, float]:
        idx, dist = self.query(np.asarray(q, dtype=np.float64).reshape(1, -1))
        return int(idx[0]), float(dist[0])

    def hit_counts(self, queries: PointCloud) -> np.ndarray:
        """count[j] - кількість запитів, для яких j є найближчою точкою"""
        if queries.dim != self._source.dim:
            raise ValidationException(
                f"Dimension mismatch: {queries.dim} vs {self._source.dim}"
            )
        idx, _ = self.query(queries.points)
        return np.bincount(idx, minlength=len(self._source)).astype(np.int64)


def build_index(cloud: PointCloud) -> NNIndex:
    return NNIndex(cloud)


def nearest(index: NNIndex, q: np.ndarray) -> Tuple[int, float]:
    return index.nearest(q)


def nearest_hit_counts(queries: PointCloud, index: NNIndex) -> np.ndarray:
    return index.hit_counts(queries)
