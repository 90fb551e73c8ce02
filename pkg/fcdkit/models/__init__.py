from fcdkit.models.cloud import (
    GradientField,
    PointCloud,
    StageLossSpec,
    TriangleMesh,
    require_non_empty,
    require_same_dim,
)


__all__ = [
    "PointCloud",
    "TriangleMesh",
    "GradientField",
    "StageLossSpec",
    "require_non_empty",
    "require_same_dim",
]
