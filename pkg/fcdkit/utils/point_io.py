"""Читання та запис хмар точок (XYZ, ASCII PLY) і сіток (PLY через plyfile, OBJ через trimesh)"""
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import trimesh
from plyfile import PlyData, PlyElement, PlyParseError

from fcdkit.core.exceptions import DataFileException
from fcdkit.models import PointCloud, TriangleMesh

logger = logging.getLogger(__name__)

XYZ_SUFFIXES = (".xyz", ".txt", ".pts")
CLOUD_SUFFIXES = XYZ_SUFFIXES + (".ply",)
MESH_SUFFIXES = (".ply", ".obj")


def _require_file(path: Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise DataFileException(f"File not found: {path}")
    return path


def _read_lines(path: Path) -> List[str]:
    path = _require_file(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read().splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise DataFileException(f"Cannot read {path}: {e}")


def _parse_floats(tokens: Sequence[str], path: Path, line_no: int) -> List[float]:
    try:
        return [float(token) for token in tokens]
    except ValueError:
        raise DataFileException(f"{path}:{line_no}: expected numeric coordinates")


def read_xyz(path: Path) -> PointCloud:
    """Одна точка на рядок; # - коментар, порожні рядки пропускаються"""
    rows: List[List[float]] = []
    for line_no, line in enumerate(_read_lines(path), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        row = _parse_floats(stripped.split(), path, line_no)
        if rows and len(row) != len(rows[0]):
            raise DataFileException(
                f"{path}:{line_no}: expected {len(rows[0])} coordinates, got {len(row)}"
            )
        rows.append(row)

    if not rows:
        raise DataFileException(f"{path}: no points found")
    logger.debug(f"Read {len(rows)} points from {path}")
    return PointCloud(np.array(rows, dtype=np.float64))


def write_xyz(path: Path, cloud: PointCloud) -> None:
    """17 значущих цифр: значення читаються назад без втрат"""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for point in cloud.points:
            f.write(" ".join(f"{value:.17g}" for value in point) + "\n")


def _read_plydata(path: Path) -> PlyData:
    path = _require_file(path)
    try:
        plydata = PlyData.read(str(path))
    except (PlyParseError, ValueError, UnicodeDecodeError) as e:
        raise DataFileException(f"{path}: malformed PLY: {e}")
    if not plydata.text:
        raise DataFileException(f"{path}: only ASCII PLY is supported, got {plydata.byte_order!r} binary")
    return plydata


def _element(plydata: PlyData, name: str) -> Optional[PlyElement]:
    return next((element for element in plydata.elements if element.name == name), None)


def _ply_vertices(plydata: PlyData, path: Path) -> np.ndarray:
    vertex = _element(plydata, "vertex")
    if vertex is None or vertex.count == 0:
        raise DataFileException(f"{path}: no vertex element")
    names = vertex.data.dtype.names or ()
    if not all(axis in names for axis in ("x", "y", "z")):
        raise DataFileException(f"{path}: vertex element needs x, y, z properties")
    return np.stack([vertex["x"], vertex["y"], vertex["z"]], axis=-1).astype(np.float64)


def _fan(polygon: Sequence[int]) -> List[Tuple[int, int, int]]:
    """Розбиття многокутника віялом від першої вершини"""
    return [(polygon[0], polygon[i], polygon[i + 1]) for i in range(1, len(polygon) - 1)]


def read_ply(path: Path) -> PointCloud:
    """Вершини x, y, z з ASCII PLY; інші властивості ігноруються"""
    plydata = _read_plydata(path)
    return PointCloud(_ply_vertices(plydata, Path(path)))


def read_ply_mesh(path: Path) -> TriangleMesh:
    path = Path(path)
    plydata = _read_plydata(path)
    vertices = _ply_vertices(plydata, path)

    triangles: List[Tuple[int, int, int]] = []
    face = _element(plydata, "face")
    if face is not None and face.count:
        names = face.data.dtype.names or ()
        key = next((name for name in ("vertex_indices", "vertex_index") if name in names), None)
        if key is None:
            raise DataFileException(f"{path}: face element needs a vertex_indices list")
        for k, polygon in enumerate(face[key]):
            if len(polygon) < 3:
                raise DataFileException(f"{path}: face {k} needs at least 3 vertex indices")
            triangles.extend(_fan([int(index) for index in polygon]))

    return TriangleMesh(vertices, np.array(triangles, dtype=np.int64).reshape(-1, 3))


def read_obj_mesh(path: Path) -> TriangleMesh:
    """Вершини та грані OBJ через trimesh (многокутники тріангулюються)"""
    path = _require_file(path)
    try:
        mesh = trimesh.load_mesh(str(path), file_type="obj", process=False, maintain_order=True)
    except (ValueError, IndexError, KeyError, UnicodeDecodeError) as e:
        raise DataFileException(f"{path}: malformed OBJ: {e}")
    if not isinstance(mesh, trimesh.Trimesh) or len(mesh.vertices) == 0:
        raise DataFileException(f"{path}: no vertices found")
    return TriangleMesh(
        np.asarray(mesh.vertices, dtype=np.float64),
        np.asarray(mesh.faces, dtype=np.int64).reshape(-1, 3),
    )


def load_cloud(path: Path) -> PointCloud:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in XYZ_SUFFIXES:
        return read_xyz(path)
    if suffix == ".ply":
        return read_ply(path)
    raise DataFileException(f"Unsupported point cloud format '{suffix}' ({path})")


def load_mesh(path: Path) -> TriangleMesh:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ply":
        return read_ply_mesh(path)
    if suffix == ".obj":
        return read_obj_mesh(path)
    raise DataFileException(f"Unsupported mesh format '{suffix}' ({path})")
