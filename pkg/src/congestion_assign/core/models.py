"""
データモデル定義

基本図パラメータ・リンク旅行時間係数・OD需要・リンク状態・流量パターンのモデルを定義する。
単位は時間[hr]・距離[km]・流量[台/時]・密度[台/km]で統一する。
"""

from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from congestion_assign.core.config import settings


def coerce_id(value: object) -> object:
    """YAML上の数値IDを文字列IDにそろえる"""
    if isinstance(value, bool):
        return value
    if isinstance(value, int | float):
        return str(int(value)) if float(value).is_integer() else str(value)
    return value


# =============================================================================
# 基本図パラメータ
# =============================================================================

BASIC_PARAM_ORDER: tuple[str, ...] = ("v_free", "v_cr", "w", "d_jam", "r_mc")


class BasicParams(BaseModel):
    """基本図の基本パラメータ"""

    model_config = ConfigDict(frozen=True)

    v_free: float = Field(gt=0, description="自由流速度 km/h")
    v_cr: float = Field(gt=0, description="臨界速度 km/h")
    w: float = Field(gt=0, description="後退衝撃波速度 km/h")
    d_jam: float = Field(gt=0, description="飽和密度 台/km")
    r_mc: float = Field(gt=0, description="容量低下率")

    @model_validator(mode="after")
    def check_speed_order(self) -> "BasicParams":
        if self.v_cr >= self.v_free:
            raise ValueError(
                f"臨界速度 v_cr={self.v_cr} は自由流速度 v_free={self.v_free} 未満である必要があります"
            )
        return self


class ParamInterval(BaseModel):
    """基本パラメータの閉区間 [lo, hi]"""

    model_config = ConfigDict(frozen=True)

    lo: float = Field(gt=0)
    hi: float = Field(gt=0)

    @model_validator(mode="after")
    def check_order(self) -> "ParamInterval":
        if self.lo > self.hi:
            raise ValueError(f"区間の下限 {self.lo} が上限 {self.hi} を超えています")
        return self

    def contains(self, value: float, rel_tol: float = 1e-9) -> bool:
        slack = rel_tol * abs(self.hi)
        return self.lo - slack <= value <= self.hi + slack


class ParamRanges(BaseModel):
    """基本パラメータの許容範囲（既定値は実務的な範囲）"""

    model_config = ConfigDict(frozen=True)

    v_free: ParamInterval = Field(default_factory=lambda: ParamInterval(lo=60.0, hi=80.0))
    v_cr: ParamInterval = Field(default_factory=lambda: ParamInterval(lo=40.0, hi=45.0))
    w: ParamInterval = Field(default_factory=lambda: ParamInterval(lo=15.0, hi=20.0))
    d_jam: ParamInterval = Field(default_factory=lambda: ParamInterval(lo=110.0, hi=145.0))
    r_mc: ParamInterval = Field(default_factory=lambda: ParamInterval(lo=0.05, hi=0.08))

    def interval(self, name: str) -> ParamInterval:
        interval: ParamInterval = getattr(self, name)
        return interval


# =============================================================================
# リンク
# =============================================================================


class LinkParams(BaseModel):
    """2分岐旅行時間関数の係数

    非渋滞分岐 t = t_free + alpha * x（0 <= x <= q_cr）、
    渋滞分岐 t = gamma + beta / x（Δ <= x <= q_max）。
    符号や連続性の検査は fdgen.verify_consistency が担う。
    """

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(description="非渋滞分岐の傾き hr/(台/時)")
    beta: float = Field(description="渋滞分岐の分子係数 hr・台/時")
    gamma: float = Field(description="渋滞分岐の切片 hr")
    t_free: float = Field(gt=0, description="自由流旅行時間 hr")
    q_max: float = Field(gt=0, description="渋滞分岐の最大流量 台/時")
    q_cr: float = Field(gt=0, description="臨界流量 台/時")
    d_max: float | None = Field(default=None, description="最大流量時の密度 台/km（生成時のみ）")

    @property
    def t_cr(self) -> float:
        """渋滞分岐の端点 x = q_max における旅行時間"""
        return self.gamma + self.beta / self.q_max


class Link(BaseModel):
    """有向リンク"""

    model_config = ConfigDict(frozen=True)

    id: str
    tail: str
    head: str
    length_km: float = Field(gt=0)
    params: LinkParams

    @field_validator("id", "tail", "head", mode="before")
    @classmethod
    def coerce_ids(cls, value: object) -> object:
        return coerce_id(value)


# =============================================================================
# OD需要・品種
# =============================================================================


class DemandEntry(BaseModel):
    """OD需要1件"""

    model_config = ConfigDict(frozen=True)

    origin: str
    destination: str
    demand_veh_hr: float = Field(ge=0)

    @field_validator("origin", "destination", mode="before")
    @classmethod
    def coerce_ids(cls, value: object) -> object:
        return coerce_id(value)


class DemandTable(BaseModel):
    """OD需要表（対角要素は読み込み時に除外）"""

    entries: list[DemandEntry] = Field(default_factory=list)

    @field_validator("entries")
    @classmethod
    def drop_diagonal(cls, entries: list[DemandEntry]) -> list[DemandEntry]:
        return [e for e in entries if e.origin != e.destination]

    @property
    def total_demand(self) -> float:
        return sum(e.demand_veh_hr for e in self.entries)

    def nodes(self) -> set[str]:
        found: set[str] = set()
        for e in self.entries:
            found.add(e.origin)
            found.add(e.destination)
        return found


class Commodity(BaseModel):
    """品種（既定では同一起点の需要をまとめたもの）"""

    model_config = ConfigDict(frozen=True)

    key: str
    origin: str
    demands: dict[str, float]

    @property
    def total(self) -> float:
        return sum(self.demands.values())

    def net_supply(self, node: str) -> float:
        """ノードにおける正味供給量（起点で +総需要、終点で -需要）"""
        supply = self.total if node == self.origin else 0.0
        return supply - self.demands.get(node, 0.0)


# =============================================================================
# リンク状態・流量
# =============================================================================


class AssignmentModel(str, Enum):
    """配分モデル"""

    UE = "ue"
    SO = "so"


class StateVector(BaseModel):
    """リンク状態 δ_a（1 = 非渋滞、0 = 渋滞）"""

    states: dict[str, Literal[0, 1]]

    @classmethod
    def all_uncongested(cls, link_ids: list[str] | tuple[str, ...]) -> "StateVector":
        return cls(states={link_id: 1 for link_id in link_ids})

    def is_congested(self, link_id: str) -> bool:
        return self.states[link_id] == 0

    def congested_links(self) -> list[str]:
        return [link_id for link_id, s in self.states.items() if s == 0]

    def with_congested(self, link_ids: set[str] | list[str]) -> "StateVector":
        """指定リンクを渋滞状態にした新しい状態ベクトル"""
        targets = set(link_ids)
        return StateVector(
            states={a: 0 if a in targets else s for a, s in self.states.items()}
        )


class FlowPattern(BaseModel):
    """品種別・集計リンク流量"""

    commodity_flows: dict[str, dict[str, float]] = Field(default_factory=dict)
    aggregate_flows: dict[str, float]

    def aggregation_residual(self) -> float:
        """集計流量と品種別流量の和の差の最大値"""
        worst = 0.0
        for link_id, total in self.aggregate_flows.items():
            summed = sum(flows.get(link_id, 0.0) for flows in self.commodity_flows.values())
            worst = max(worst, abs(total - summed))
        return worst


class CostConfig(BaseModel):
    """旅行時間関数の設定"""

    model_config = ConfigDict(frozen=True)

    delta: float = Field(default_factory=lambda: settings.delta, gt=0)
