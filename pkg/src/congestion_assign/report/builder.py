"""
実行レポート

配分・進展解析の結果を、解いたときの設定値とあわせて RunReport にまとめる。
RunReport は JSON に書き出して読み戻しても内容が変わらない。
"""

import json
import logging
import math
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, ValidationError

from congestion_assign import __version__
from congestion_assign.core.models import AssignmentModel, FlowPattern, LinkParams, StateVector
from congestion_assign.core.network import Network
from congestion_assign.evolution.runner import EvolutionReport, Verdict, VerdictKind
from congestion_assign.ingest.loaders import InputFileError
from congestion_assign.solver.assign import AssignmentResult
from congestion_assign.solver.bnb import BnBRun, BnBStatus
from congestion_assign.solver.cqp import QPStatus

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


def finite_or_none(value: float | None) -> float | None:
    """JSON に書けない nan / inf を None にする"""
    if value is None or not math.isfinite(value):
        return None
    return float(value)


# =============================================================================
# レポートのモデル
# =============================================================================


class ReportConfig(BaseModel):
    """解いたときの設定値（seed はネットワークファイルに記録された係数生成のシード）"""

    model: AssignmentModel
    epsilon: float
    delta: float
    seed: int | None = None
    per_od: bool = False
    workers: int = 1
    bottleneck_tolerance: float | None = None


class LinkReport(BaseModel):
    """リンクごとの状態・流量・旅行時間"""

    id: str
    tail: str
    head: str
    state: Literal[0, 1]
    params: LinkParams
    flow: float | None = None
    travel_time: float | None = None

    @property
    def utilization(self) -> float | None:
        """分岐の上限（非渋滞は q_cr、渋滞は q_max）に対する流量の比"""
        if self.flow is None:
            return None
        cap = self.params.q_cr if self.state == 1 else self.params.q_max
        return self.flow / cap


class HistoryRow(BaseModel):
    iteration: int
    lower_bound: float | None
    upper_bound: float | None


class NodeRow(BaseModel):
    index: int
    relaxation: float | None
    ue_value: float | None
    status: QPStatus


class BoundReport(BaseModel):
    """分枝限定法の上下界と計数"""

    status: BnBStatus
    epsilon: float
    lower_bound: float | None = None
    upper_bound: float | None = None
    gap: float | None = None
    certified: bool = False
    iterations: int = 0
    cqp_solves: int = 0
    live_boxes: int = 0
    unreliable_nodes: int = 0
    leaf_boxes: int = 0
    congested_links: list[str] = Field(default_factory=list)
    history: list[HistoryRow] = Field(default_factory=list)
    nodes: list[NodeRow] = Field(default_factory=list)


class ReferenceVerdict(str, Enum):
    """参照値との比較"""

    WITHIN = "within"
    BELOW = "below"
    ABOVE = "above"


class ReferenceCheck(BaseModel):
    """原始関数形の目的関数値と既知の参照値の比較

    参照値より許容幅を超えて小さい解は BELOW として残す（参照値が局所解だった可能性がある）。
    """

    reference: float
    value: float
    tolerance: float = 0.01
    relative_difference: float
    verdict: ReferenceVerdict

    @property
    def flagged(self) -> bool:
        return self.verdict != ReferenceVerdict.WITHIN


def compare_with_reference(value: float, reference: float, tolerance: float = 0.01) -> ReferenceCheck:
    """value を参照値と比べ、相対差が tolerance 以内なら WITHIN"""
    if not math.isfinite(value) or not math.isfinite(reference) or reference == 0:
        raise ValueError(f"参照値と比較できません: value={value}, reference={reference}")
    relative = (value - reference) / abs(reference)
    if relative > tolerance:
        verdict = ReferenceVerdict.ABOVE
    elif relative < -tolerance:
        verdict = ReferenceVerdict.BELOW
    else:
        verdict = ReferenceVerdict.WITHIN
    if verdict != ReferenceVerdict.WITHIN:
        logger.warning(
            f"目的関数値 {value:.6f} が参照値 {reference:.6f} から {relative:+.2%} 離れています（{verdict.value}）"
        )
    return ReferenceCheck(
        reference=reference,
        value=value,
        tolerance=tolerance,
        relative_difference=relative,
        verdict=verdict,
    )


class LevelReport(BaseModel):
    """進展解析の1段階"""

    index: int
    status: BnBStatus
    congested: list[str] = Field(default_factory=list)
    bottleneck: list[str] = Field(default_factory=list)
    zone: list[str] = Field(default_factory=list)
    objective: float | None = None
    potential: float | None = None
    gap: float | None = None
    cqp_solves: int = 0
    flows: dict[str, float] = Field(default_factory=dict)


class RunReport(BaseModel):
    """配分または進展解析1回分の結果"""

    schema_version: int = REPORT_SCHEMA_VERSION
    kind: Literal["assign", "evolve"]
    network: str = ""
    config: ReportConfig
    status: str
    objective: float | None = None
    potential: float | None = None
    links: list[LinkReport] = Field(default_factory=list)
    commodity_flows: dict[str, dict[str, float]] = Field(default_factory=dict)
    bnb: BoundReport | None = None
    levels: list[LevelReport] = Field(default_factory=list)
    verdict: Verdict | None = None
    reference: ReferenceCheck | None = None
    meta: dict[str, str] = Field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        if self.kind == "evolve":
            return self.verdict is not None and self.verdict.kind != VerdictKind.DISABLED
        return self.status != BnBStatus.INFEASIBLE.value

    def link(self, link_id: str) -> LinkReport:
        for row in self.links:
            if row.id == link_id:
                return row
        raise KeyError(link_id)


# =============================================================================
# 組み立て
# =============================================================================


def _meta(include_meta: bool) -> dict[str, str]:
    if not include_meta:
        return {}
    return {
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
    }


def _with_seed(config: ReportConfig, network: Network) -> ReportConfig:
    """ネットワークの meta に係数生成のシードがあれば設定値に写す"""
    seed = network.meta.get("seed")
    if config.seed is not None or not isinstance(seed, int) or isinstance(seed, bool):
        return config
    return config.model_copy(update={"seed": seed})


def _link_rows(
    network: Network,
    state: StateVector,
    flows: FlowPattern | None,
    travel_times: dict[str, float] | None = None,
) -> list[LinkReport]:
    aggregate = flows.aggregate_flows if flows is not None else {}
    travel_times = travel_times or {}
    return [
        LinkReport(
            id=link.id,
            tail=link.tail,
            head=link.head,
            state=state.states[link.id],
            params=link.params,
            flow=finite_or_none(aggregate.get(link.id)),
            travel_time=finite_or_none(travel_times.get(link.id)),
        )
        for link in network.links
    ]


def bound_report(run: BnBRun) -> BoundReport:
    """分枝限定法の結果をレポート形式に変換"""
    return BoundReport(
        status=run.status,
        epsilon=run.epsilon,
        lower_bound=finite_or_none(run.lower_bound),
        upper_bound=finite_or_none(run.incumbent_value),
        gap=finite_or_none(run.gap),
        certified=run.certified,
        iterations=run.iterations,
        cqp_solves=run.cqp_solves,
        live_boxes=run.live_boxes,
        unreliable_nodes=run.unreliable_nodes,
        leaf_boxes=run.leaf_boxes,
        congested_links=list(run.congested_links),
        history=[
            HistoryRow(
                iteration=h.iteration,
                lower_bound=finite_or_none(h.lower_bound),
                upper_bound=finite_or_none(h.upper_bound),
            )
            for h in run.history
        ],
        nodes=[
            NodeRow(
                index=n.index,
                relaxation=finite_or_none(n.relaxation),
                ue_value=finite_or_none(n.ue_value),
                status=n.status,
            )
            for n in run.nodes
        ],
    )


def build_assign_report(
    network: Network,
    result: AssignmentResult,
    config: ReportConfig,
    include_meta: bool = True,
    reference_potential: float | None = None,
) -> RunReport:
    """配分結果から RunReport を作成

    reference_potential を与えると、原始関数形の目的関数値を参照値と比べた結果を載せる。
    """
    report = RunReport(
        kind="assign",
        network=network.name,
        config=_with_seed(config, network),
        status=result.status.value,
        objective=finite_or_none(result.objective),
        potential=finite_or_none(result.potential),
        links=_link_rows(network, result.state, result.flows, result.travel_times),
        bnb=bound_report(result.bnb) if result.bnb is not None else None,
        meta=_meta(include_meta),
    )
    if result.flows is not None:
        report.commodity_flows = {
            key: dict(flows) for key, flows in result.flows.commodity_flows.items()
        }
    if reference_potential is not None and report.potential is not None:
        report.reference = compare_with_reference(report.potential, reference_potential)
    return report


def build_evolve_report(
    network: Network,
    evolution: EvolutionReport,
    config: ReportConfig,
    include_meta: bool = True,
) -> RunReport:
    """進展解析の結果から RunReport を作成

    リンク表は流量が得られた最後の段階の状態と流量で埋める。
    """
    levels = [
        LevelReport(
            index=level.index,
            status=level.status,
            congested=level.state.congested_links(),
            bottleneck=list(level.bottleneck),
            zone=list(level.zone),
            objective=finite_or_none(level.objective),
            potential=finite_or_none(level.potential),
            gap=finite_or_none(level.gap),
            cqp_solves=level.cqp_solves,
            flows=dict(level.flows.aggregate_flows) if level.flows is not None else {},
        )
        for level in evolution.levels
    ]
    solved = [level for level in evolution.levels if level.flows is not None]
    last = solved[-1] if solved else None
    state = last.state if last is not None else network.uncongested_state()
    flows = last.flows if last is not None else None

    return RunReport(
        kind="evolve",
        network=network.name,
        config=_with_seed(config, network),
        status=str(evolution.verdict) if evolution.verdict else "undetermined",
        objective=finite_or_none(last.objective) if last is not None else None,
        potential=finite_or_none(last.potential) if last is not None else None,
        links=_link_rows(network, state, flows),
        levels=levels,
        verdict=evolution.verdict,
        meta=_meta(include_meta),
    )


# =============================================================================
# 入出力
# =============================================================================


def dump_report(report: RunReport) -> str:
    """JSON 文字列に変換（同じ内容なら同じ文字列になる）"""
    return report.model_dump_json(indent=2) + "\n"


def write_report(path: Path, report: RunReport) -> None:
    """RunReport を JSON ファイルに書き出す"""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_report(report), encoding="utf-8")
    logger.info(f"レポートを書き出しました: {path}")


def load_report(path: Path) -> RunReport:
    """JSON ファイルから RunReport を読み込む"""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputFileError(f"ファイルを読み込めません: {e}", path) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputFileError(f"JSON の構文エラー: {e.msg}", path, f"{e.lineno}:{e.colno}") from e
    try:
        return RunReport.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise InputFileError(first["msg"], path, location) from e
