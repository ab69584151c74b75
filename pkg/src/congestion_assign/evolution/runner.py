"""
渋滞域の進展解析

全リンク非渋滞から配分を始め、臨界流量に達したリンク（ボトルネック）を渋滞状態に切り替えて
配分を繰り返し、ネットワークを「非渋滞」「第n段階の最終渋滞」「第i段階で機能不全」に分類する。
"""

import logging
from collections.abc import Sequence
from enum import Enum

from pydantic import BaseModel, Field

from congestion_assign.core.config import settings
from congestion_assign.core.models import (
    AssignmentModel,
    CostConfig,
    DemandTable,
    FlowPattern,
    StateVector,
)
from congestion_assign.core.network import Network, aggregate_by_origin
from congestion_assign.solver.assign import AssignmentResult, assign
from congestion_assign.solver.bnb import BnBLimits, BnBStatus
from congestion_assign.solver.cqp import QPTolerances

logger = logging.getLogger(__name__)


class EvolutionBudgetError(RuntimeError):
    """途中の配分がソルバーの上限に達した"""

    def __init__(self, message: str, report: "EvolutionReport"):
        super().__init__(message)
        self.report = report


class VerdictKind(str, Enum):
    """ネットワークの分類"""

    TOTALLY_UNCONGESTED = "totally_uncongested"
    FINAL_CONGESTION = "final_congestion"
    DISABLED = "disabled"


class Verdict(BaseModel):
    """分類と段階数"""

    kind: VerdictKind
    level: int = 0

    def __str__(self) -> str:
        if self.kind == VerdictKind.TOTALLY_UNCONGESTED:
            return self.kind.value
        return f"{self.kind.value}({self.level})"


class EvolutionLevel(BaseModel):
    """シナリオ i の配分結果と、そこで検出したボトルネック G^i・渋滞域 Ḡ^i"""

    index: int
    state: StateVector
    status: BnBStatus
    flows: FlowPattern | None = None
    objective: float | None = None
    potential: float | None = None
    bottleneck: list[str] = Field(default_factory=list)
    zone: list[str] = Field(default_factory=list)
    cqp_solves: int = 0
    gap: float | None = None


class EvolutionReport(BaseModel):
    """進展解析の結果"""

    model: AssignmentModel
    levels: list[EvolutionLevel] = Field(default_factory=list)
    verdict: Verdict | None = None

    @property
    def bottleneck_sequence(self) -> list[list[str]]:
        return [level.bottleneck for level in self.levels if level.bottleneck]

    @property
    def final_zone(self) -> list[str]:
        return self.levels[-1].zone if self.levels else []

    def summary(self) -> str:
        lines = [f"判定: {self.verdict}" if self.verdict else "判定: 未確定"]
        for level in self.levels:
            obj = f"{level.objective:.4f}" if level.objective is not None else "-"
            bottleneck = ", ".join(level.bottleneck) or "なし"
            lines.append(f"  シナリオ {level.index}: {level.status.value}, 目的関数 {obj}, ボトルネック {bottleneck}")
        return "\n".join(lines)


class DispersionStep(BaseModel):
    """渋滞解消過程の1段階（記録した段階の状態を、減少した需要で解き直した結果）"""

    level_index: int
    state: StateVector
    status: BnBStatus
    flows: FlowPattern | None = None
    objective: float | None = None
    potential: float | None = None


def detect_bottleneck(
    network: Network,
    state: StateVector,
    flows: FlowPattern | dict[str, float],
    tolerance: float | None = None,
) -> list[str]:
    """臨界流量に達した非渋滞リンク {a : δ_a = 1, |x_a - q_cr| <= tol q_cr}"""
    tolerance = settings.bottleneck_tolerance if tolerance is None else tolerance
    aggregate = flows.aggregate_flows if isinstance(flows, FlowPattern) else flows
    found: list[str] = []
    for link in network.links:
        if state.states[link.id] != 1:
            continue
        q_cr = link.params.q_cr
        if abs(aggregate[link.id] - q_cr) <= tolerance * q_cr:
            found.append(link.id)
    return found


def _level_from(index: int, result: AssignmentResult) -> EvolutionLevel:
    level = EvolutionLevel(
        index=index,
        state=result.state,
        status=result.status,
        flows=result.flows,
        cqp_solves=result.cqp_solves,
    )
    if result.flows is not None:
        level.objective = result.objective
        level.potential = result.potential
    if result.bnb is not None and result.flows is not None:
        level.gap = result.bnb.gap
    return level


def evolve(
    network: Network,
    demands: DemandTable,
    model: AssignmentModel = AssignmentModel.UE,
    config: CostConfig | None = None,
    epsilon: float | None = None,
    limits: BnBLimits | None = None,
    tolerances: QPTolerances | None = None,
    bottleneck_tolerance: float | None = None,
    per_od: bool = False,
) -> EvolutionReport:
    """渋滞域の進展を段階ごとに追跡する

    渋滞域 Ḡ^i のリンクを δ = 0 とした状態で次のシナリオを解く。
    ボトルネックが空になれば最終渋滞、配分が実行不能なら機能不全と判定する。
    """
    config = config or CostConfig()
    commodities = aggregate_by_origin(demands, per_od)
    report = EvolutionReport(model=model)
    zone: list[str] = []
    state = network.uncongested_state()

    for index in range(1, len(network.links) + 2):
        logger.info(f"シナリオ {index}: 渋滞リンク {len(zone)}本で配分")
        result = assign(network, commodities, state, model, epsilon, config, limits, tolerances)
        level = _level_from(index, result)
        report.levels.append(level)

        if result.status == BnBStatus.INFEASIBLE:
            level.zone = list(zone)
            report.verdict = Verdict(kind=VerdictKind.DISABLED, level=index)
            break
        if result.status == BnBStatus.ITERATION_LIMIT or result.flows is None:
            level.zone = list(zone)
            raise EvolutionBudgetError(
                f"シナリオ {index} の配分がソルバーの上限に達しました", report
            )

        bottleneck = detect_bottleneck(network, state, result.flows, bottleneck_tolerance)
        level.bottleneck = bottleneck
        zone = zone + bottleneck
        level.zone = list(zone)
        logger.info(f"シナリオ {index}: 目的関数 {result.objective:.6f}, ボトルネック {bottleneck or 'なし'}")

        if not bottleneck:
            if index == 1:
                report.verdict = Verdict(kind=VerdictKind.TOTALLY_UNCONGESTED, level=0)
            else:
                report.verdict = Verdict(kind=VerdictKind.FINAL_CONGESTION, level=index - 1)
            break
        state = state.with_congested(zone)

    logger.info(f"進展解析を終了: {report.verdict}")
    return report


def replay_level(
    network: Network,
    demands: DemandTable,
    level: EvolutionLevel,
    model: AssignmentModel = AssignmentModel.UE,
    config: CostConfig | None = None,
    epsilon: float | None = None,
    limits: BnBLimits | None = None,
    tolerances: QPTolerances | None = None,
) -> AssignmentResult:
    """記録した段階の状態で配分し直す"""
    return assign(network, demands, level.state, model, epsilon, config, limits, tolerances)


def disperse(
    network: Network,
    report: EvolutionReport,
    demand_steps: Sequence[DemandTable],
    model: AssignmentModel | None = None,
    config: CostConfig | None = None,
    epsilon: float | None = None,
    limits: BnBLimits | None = None,
    tolerances: QPTolerances | None = None,
) -> list[DispersionStep]:
    """渋滞の解消過程を、記録した段階を逆順にたどって再現する

    実行可能だった段階を最後から順に、demand_steps の需要表を1つずつ割り当てて解く。
    """
    model = model or report.model
    replayable = [lv for lv in report.levels if lv.status != BnBStatus.INFEASIBLE]
    if len(demand_steps) != len(replayable):
        raise ValueError(
            f"需要表の数 {len(demand_steps)} が再現する段階の数 {len(replayable)} と一致しません"
        )

    steps: list[DispersionStep] = []
    for level, demands in zip(reversed(replayable), demand_steps):
        result = replay_level(network, demands, level, model, config, epsilon, limits, tolerances)
        step = DispersionStep(
            level_index=level.index,
            state=level.state,
            status=result.status,
            flows=result.flows,
        )
        if result.flows is not None:
            step.objective = result.objective
            step.potential = result.potential
        steps.append(step)
        logger.info(f"解消過程: 段階 {level.index} を {result.status.value} で再現")
    return steps
