import json
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from fcdkit.utils.csv_io import format_value


class DistanceOrder(str, Enum):
    """Порядок відстані: евклідова (r=1) або її квадрат (r=2)"""
    FIRST = "l1"
    SECOND = "l2"

    @property
    def power(self) -> int:
        return 1 if self is DistanceOrder.FIRST else 2

    @classmethod
    def _missing_(cls, value: object) -> Optional["DistanceOrder"]:
        # Дозволяємо r=1 / r=2 як у формулах
        if str(value).strip() in ("1", "first"):
            return cls.FIRST
        if str(value).strip() in ("2", "second"):
            return cls.SECOND
        return None


# Фіксований порядок колонок для JSON та CSV
METRIC_COLUMNS: List[str] = [
    "cd_l1", "cd_l2", "dcd", "emd", "fscore", "hausdorff", "p2f", "fidelity",
]

# Метрики, що мають розмірність відстані (масштабуються прапорцем --scale)
DISTANCE_METRICS = frozenset({"cd_l1", "cd_l2", "emd", "hausdorff", "p2f", "fidelity"})


class MetricReport(BaseModel):
    """Набір метрик для однієї пари хмар; відсутні метрики - None"""
    cd_l1: Optional[float] = Field(None, ge=0)
    cd_l2: Optional[float] = Field(None, ge=0)
    dcd: Optional[float] = Field(None, ge=0, le=1)
    emd: Optional[float] = Field(None, ge=0)
    fscore: Optional[float] = Field(None, ge=0, le=1)
    hausdorff: Optional[float] = Field(None, ge=0)
    p2f: Optional[float] = Field(None, ge=0)
    fidelity: Optional[float] = Field(None, ge=0)

    model_config = ConfigDict(frozen=True)

    def to_json(self) -> str:
        """Плаский JSON-об'єкт у фіксованому порядку колонок"""
        data = self.model_dump()
        return json.dumps({name: data[name] for name in METRIC_COLUMNS})

    @staticmethod
    def csv_header() -> List[str]:
        return list(METRIC_COLUMNS)

    def csv_row(self) -> List[str]:
        return [format_value(getattr(self, name)) for name in METRIC_COLUMNS]
