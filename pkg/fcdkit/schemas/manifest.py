from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from fcdkit import __version__


class RunManifest(BaseModel):
    """Опис запуску CLI, достатній для байт-ідентичного повтору"""
    command: str
    argv: List[str]
    flags: Dict[str, Any] = Field(default_factory=dict)
    seed: int
    inputs: Dict[str, str] = Field(default_factory=dict)  # шлях -> sha256
    config_file: Optional[str] = None
    version: str = __version__

    def to_json(self) -> str:
        return self.model_dump_json(indent=2) + "\n"
