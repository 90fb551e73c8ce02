import math
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from fcdkit.schemas.objective import FcdWeights

Point2 = Tuple[float, float]


def default_sweep_xs() -> List[float]:
    """0.6 .. 3.4 з кроком 0.1 без середини 2.0"""
    return [k / 10 for k in range(6, 35) if k != 20]


SWEEP_COLUMNS = [
    "x", "cd_l1", "fcd_l1", "cd_l2", "fcd_l2",
    "grad_cd_l1_x", "grad_fcd_l1_x", "grad_cd_l2_x", "grad_fcd_l2_x",
]


class SweepConfig(BaseModel):
    """Дві цілі g1, g2 на осі x, закріплена p1 та положення p2=(x, 0)"""
    g1: Point2 = (0.0, 0.0)
    g2: Point2 = (4.0, 0.0)
    p1: Point2 = (0.5, 0.0)
    xs: List[float] = Field(default_factory=default_sweep_xs)
    weights: FcdWeights = Field(default_factory=lambda: FcdWeights(alpha=1.0, beta=2.0))

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_sweep(self) -> "SweepConfig":
        if self.g1 == self.g2:
            raise ValueError("g1 and g2 must differ")
        if not self.xs:
            raise ValueError("Sweep needs at least one abscissa")
        if any(not math.isfinite(x) for x in self.xs):
            raise ValueError("Sweep abscissae must be finite")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ValueError("Sweep abscissae must be strictly increasing")

        anchor = math.dist(self.p1, self.g1)
        if not anchor < math.dist(self.p1, self.g2):
            raise ValueError("p1 must be nearer to g1 than to g2")
        for x in self.xs:
            p2 = (x, 0.0)
            if not math.dist(p2, self.g1) > anchor:
                raise ValueError(
                    f"x={x} violates the validity condition |p2-g1| > |p1-g1|"
                )
            if math.dist(p2, self.g1) == math.dist(p2, self.g2):
                raise ValueError(f"x={x} is equidistant from g1 and g2")
        return self


class SweepRow(BaseModel):
    x: float
    cd_l1: float
    fcd_l1: float
    cd_l2: float
    fcd_l2: float
    grad_cd_l1_x: float
    grad_fcd_l1_x: float
    grad_cd_l2_x: float
    grad_fcd_l2_x: float

    model_config = ConfigDict(frozen=True)

    def csv_row(self) -> list:
        return [getattr(self, name) for name in SWEEP_COLUMNS]


class AmbiguityReport(BaseModel):
    """Результат побудови пари хмар з однаковим CD та різною щільністю"""
    n: int
    seed: int
    temperature: float
    spacing: float
    jitter_scale: float
    iterations: int
    cd_clustered: float
    cd_uniform: float
    dcd_clustered: float
    dcd_uniform: float

    @property
    def relative_cd_gap(self) -> float:
        return abs(self.cd_clustered - self.cd_uniform) / self.cd_uniform
