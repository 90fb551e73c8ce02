import hashlib
from pathlib import Path

from fcdkit.core.exceptions import DataFileException

CHUNK = 1 << 20


def file_sha256(path: Path) -> str:
    """SHA-256 вмісту файлу"""
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for block in iter(lambda: f.read(CHUNK), b""):
                digest.update(block)
    except OSError as e:
        raise DataFileException(f"Cannot read {path}: {e}")
    return digest.hexdigest()
