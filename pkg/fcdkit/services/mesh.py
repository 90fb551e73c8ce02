"""Відстань від точок до трикутної сітки"""
import math

import numpy as np

from fcdkit.core.config import settings
from fcdkit.core.exceptions import ValidationException
from fcdkit.models import PointCloud, TriangleMesh, require_non_empty


def closest_points_on_triangles(
    points: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray,
) -> np.ndarray:
    """Найближчі точки трикутників для кожної пари (точка, трикутник)

    points: (M, 3); a, b, c: (F, 3). Повертає (M, F, 3).
    Класифікація за областями Вороного вершин, ребер та внутрішності.
    """
    p = points[:, None, :]
    a = a[None, :, :]
    b = b[None, :, :]
    c = c[None, :, :]

    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.sum(ab * ap, axis=-1)
    d2 = np.sum(ac * ap, axis=-1)

    bp = p - b
    d3 = np.sum(ab * bp, axis=-1)
    d4 = np.sum(ac * bp, axis=-1)

    cp = p - c
    d5 = np.sum(ab * cp, axis=-1)
    d6 = np.sum(ac * cp, axis=-1)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    def safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
        return num / np.where(den == 0.0, 1.0, den)

    # Кандидати для кожної області
    on_ab = a + safe_ratio(d1, d1 - d3)[..., None] * ab
    on_ac = a + safe_ratio(d2, d2 - d6)[..., None] * ac
    on_bc = b + safe_ratio(d4 - d3, (d4 - d3) + (d5 - d6))[..., None] * (c - b)
    denom = va + vb + vc
    v = safe_ratio(vb, denom)[..., None]
    w = safe_ratio(vc, denom)[..., None]
    inside = a + ab * v + ac * w

    in_a = (d1 <= 0.0) & (d2 <= 0.0)
    in_b = (d3 >= 0.0) & (d4 <= d3)
    in_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    in_c = (d6 >= 0.0) & (d5 <= d6)
    in_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    in_bc = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)

    shape = in_a.shape + (3,)
    # Порядок перевірок як у послідовному алгоритмі: перша істинна умова перемагає
    return np.select(
        [m[..., None] for m in (in_a, in_b, in_ab, in_c, in_ac, in_bc)],
        [np.broadcast_to(x, shape) for x in (a, b, on_ab, c, on_ac, on_bc)],
        default=inside,
    )


def point_to_mesh_distances(
    cloud: PointCloud, mesh: TriangleMesh, chunk_size: int | None = None,
) -> np.ndarray:
    """Відстань кожної точки до найближчого трикутника"""
    require_non_empty(cloud)
    if cloud.dim != 3:
        raise ValidationException(f"Point-to-mesh distance needs 3D points, got dim={cloud.dim}")
    if mesh.triangle_count == 0:
        raise ValidationException("Mesh has no triangles")

    chunk = chunk_size or settings.P2F_CHUNK_SIZE
    a, b, c = mesh.corners()
    result = np.empty(len(cloud))
    for start in range(0, len(cloud), chunk):
        block = cloud.points[start:start + chunk]
        closest = closest_points_on_triangles(block, a, b, c)
        sq = np.sum((closest - block[:, None, :]) ** 2, axis=-1)
        result[start:start + chunk] = np.sqrt(sq.min(axis=1))
    return result


def mean_point_to_mesh(cloud: PointCloud, mesh: TriangleMesh, chunk_size: int | None = None) -> float:
    distances = point_to_mesh_distances(cloud, mesh, chunk_size)
    return math.fsum(distances) / len(distances)
