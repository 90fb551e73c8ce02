from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from fcdkit.core.exceptions import NumericalException, ValidationException

SUPPORTED_DIMS = (2, 3)

# Мінімальна площа трикутника, нижче якої він вважається виродженим
DEGENERATE_AREA = 1e-15


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Впорядкована множина точок розмірності 2 або 3

    Індекси точок стабільні та використовуються як ідентифікатори.
    """
    points: np.ndarray

    def __post_init__(self) -> None:
        try:
            array = np.array(self.points, dtype=np.float64, copy=True)
        except (TypeError, ValueError) as e:
            raise ValidationException(f"Point coordinates must be numeric: {e}")

        if array.ndim != 2:
            raise ValidationException(
                f"Point array must have shape (N, D), got {array.shape}"
            )
        if array.shape[1] not in SUPPORTED_DIMS:
            raise ValidationException(
                f"Point dimension must be 2 or 3, got {array.shape[1]}"
            )
        if not np.all(np.isfinite(array)):
            bad = int(np.argmax(~np.all(np.isfinite(array), axis=1)))
            raise ValidationException(f"Point {bad} has a non-finite coordinate")

        object.__setattr__(self, "points", _frozen(array))

    @classmethod
    def empty(cls, dim: int) -> PointCloud:
        return cls(np.zeros((0, dim)))

    @classmethod
    def from_iterable(cls, points: Iterable[Sequence[float]]) -> PointCloud:
        return cls(np.array(list(points), dtype=np.float64))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)}, dim={self.dim})"

    def is_empty(self) -> bool:
        return len(self) == 0

    def subset(self, indices: Sequence[int] | np.ndarray) -> PointCloud:
        """Підмножина точок у заданому порядку індексів"""
        idx = np.asarray(indices, dtype=np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self)):
            raise ValidationException("Subset index out of range")
        return PointCloud(self.points[idx])

    def with_points(self, array: np.ndarray) -> PointCloud:
        return PointCloud(array)

    def same_as(self, other: PointCloud) -> bool:
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )


def require_non_empty(*clouds: PointCloud) -> None:
    for cloud in clouds:
        if cloud.is_empty():
            raise ValidationException("Point cloud is empty")


def require_same_dim(a: PointCloud, b: PointCloud) -> None:
    if a.dim != b.dim:
        raise ValidationException(f"Dimension mismatch: {a.dim} vs {b.dim}")


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Трикутна сітка для метрики P2F"""
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64, copy=True)
        triangles = np.array(self.triangles, dtype=np.int64, copy=True)
        if vertices.size == 0:
            vertices = vertices.reshape(0, 3)
        if triangles.size == 0:
            triangles = triangles.reshape(0, 3)

        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValidationException(f"Mesh vertices must have shape (V, 3), got {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise ValidationException(f"Mesh triangles must have shape (F, 3), got {triangles.shape}")
        if not np.all(np.isfinite(vertices)):
            raise ValidationException("Mesh vertex has a non-finite coordinate")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise ValidationException("Triangle vertex index out of range")

        if triangles.size:
            a, b, c = (vertices[triangles[:, i]] for i in range(3))
            areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
            degenerate = np.flatnonzero(areas <= DEGENERATE_AREA)
            if degenerate.size:
                raise ValidationException(
                    f"Triangle {int(degenerate[0])} is degenerate (zero area)"
                )

        object.__setattr__(self, "vertices", _frozen(vertices))
        object.__setattr__(self, "triangles", _frozen(triangles))

    @property
    def triangle_count(self) -> int:
        return int(self.triangles.shape[0])

    def corners(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Три масиви (F, 3) вершин трикутників"""
        return (
            self.vertices[self.triangles[:, 0]],
            self.vertices[self.triangles[:, 1]],
            self.vertices[self.triangles[:, 2]],
        )


@dataclass(frozen=True, eq=False)
class GradientField:
    """Градієнт цільової функції по координатах кожної передбаченої точки"""
    vectors: np.ndarray

    def __post_init__(self) -> None:
        array = np.array(self.vectors, dtype=np.float64, copy=True)
        if array.ndim != 2:
            raise ValidationException(f"Gradient array must have shape (N, D), got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise NumericalException("Gradient has non-finite entries")
        object.__setattr__(self, "vectors", _frozen(array))

    @classmethod
    def zeros_like(cls, cloud: PointCloud) -> GradientField:
        return cls(np.zeros_like(cloud.points))

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def __add__(self, other: GradientField) -> GradientField:
        if self.vectors.shape != other.vectors.shape:
            raise ValidationException("Gradient shapes differ")
        return GradientField(self.vectors + other.vectors)

    def scaled(self, factor: float) -> GradientField:
        return GradientField(self.vectors * factor)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.vectors ** 2, axis=1))

    def max_norm(self) -> float:
        return float(self.norms().max()) if len(self) else 0.0


@dataclass(frozen=True)
class StageLossSpec:
    """Пари (передбачення, ціль) для грубих стадій та фінальної стадії"""
    fine_pair: Tuple[PointCloud, PointCloud]
    coarse_pairs: List[Tuple[PointCloud, PointCloud]] = field(default_factory=list)
    epoch: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "coarse_pairs", list(self.coarse_pairs))
        for predicted, target in [*self.coarse_pairs, self.fine_pair]:
            require_non_empty(predicted, target)
            require_same_dim(predicted, target)
        if self.epoch < 0:
            raise ValidationException("Epoch must be non-negative")

    @property
    def stage_count(self) -> int:
        return len(self.coarse_pairs)
