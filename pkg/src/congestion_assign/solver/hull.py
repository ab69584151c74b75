"""
割線凸包と分枝

凹関数 β ln x の区間 [l, u] 上の弦（最良の線形下界）と、渋滞リンク流量の箱の分割を扱う。
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass


class DegenerateBoxError(ValueError):
    """幅0の箱"""


@dataclass(frozen=True)
class Box:
    """渋滞リンク流量の箱 [lower, upper]（渋滞リンクのリンク順）"""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper):
            raise ValueError(f"箱の次元が一致しません: {len(self.lower)} != {len(self.upper)}")
        for j, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo > hi:
                raise ValueError(f"箱の座標 {j} で下限 {lo} が上限 {hi} を超えています")

    @classmethod
    def from_bounds(cls, lower: Sequence[float], upper: Sequence[float]) -> "Box":
        return cls(tuple(float(v) for v in lower), tuple(float(v) for v in upper))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def widths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))


@dataclass(frozen=True)
class SecantHull:
    """β ln x の弦 ȳ(x) = slope (x - lower) + intercept"""

    slope: float
    intercept: float
    lower: float
    upper: float

    def __call__(self, x: float) -> float:
        return self.slope * (x - self.lower) + self.intercept

    @property
    def linear_coefficient(self) -> float:
        return self.slope

    @property
    def constant(self) -> float:
        """ȳ(x) = slope * x + constant"""
        return self.intercept - self.slope * self.lower


def secant_hull(beta: float, lower: float, upper: float) -> SecantHull:
    """β ln x の [lower, upper] 上の凸包（弦）"""
    if lower >= upper:
        raise DegenerateBoxError(f"区間の幅が0以下です: [{lower}, {upper}]")
    if lower <= 0:
        raise ValueError(f"区間の下限は正である必要があります: {lower}")
    if beta < 0:
        raise ValueError(f"β は非負である必要があります: {beta}")
    if beta == 0:
        return SecantHull(slope=0.0, intercept=0.0, lower=lower, upper=upper)
    slope = beta * (math.log(upper) - math.log(lower)) / (upper - lower)
    return SecantHull(slope=slope, intercept=beta * math.log(lower), lower=lower, upper=upper)


def branch(box: Box) -> tuple[Box, Box]:
    """最長辺の中点で2分割する（同じ長さなら座標番号の小さい辺）"""
    widths = box.widths()
    if not widths or max(widths) <= 0:
        raise DegenerateBoxError(f"分割できる辺がありません: {box}")
    j = widths.index(max(widths))
    mid = 0.5 * (box.lower[j] + box.upper[j])
    left_upper = box.upper[:j] + (mid,) + box.upper[j + 1 :]
    right_lower = box.lower[:j] + (mid,) + box.lower[j + 1 :]
    return Box(box.lower, left_upper), Box(right_lower, box.upper)
