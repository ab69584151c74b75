"""
利用者均衡の分枝限定法

渋滞リンクの目的関数項 β ln x を箱ごとの弦で置き換えた凸2次計画を下界とし、
各ノード解の利用者均衡目的関数値を上界（暫定解）とする最良優先の分枝限定法。
ノードの凸2次計画は元問題と同じ制約を持つため、ノード解はすべて元問題の実行可能解となる。
"""

import heapq
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from congestion_assign.core.config import settings
from congestion_assign.core.models import (
    Commodity,
    CostConfig,
    DemandTable,
    FlowPattern,
    StateVector,
)
from congestion_assign.core.network import Network, aggregate_by_origin
from congestion_assign.cost.functions import check_cost_config, ue_anchor_offset, ue_objective
from congestion_assign.solver.cqp import (
    QPProblem,
    QPSolution,
    QPStatus,
    QPStructureError,
    QPTolerances,
    solve_cqp,
)
from congestion_assign.solver.formulation import build_flow_problem
from congestion_assign.solver.hull import Box, branch, secant_hull

logger = logging.getLogger(__name__)

# 下界の妥当性・単調性の判定に使う相対誤差
INVARIANT_TOLERANCE = 1e-6


class BnBInvariantError(RuntimeError):
    """下界の妥当性または上下界の単調性の破れ"""


class BnBStatus(str, Enum):
    """求解結果の状態"""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


class BnBLimits(BaseModel):
    """分枝限定法の上限設定"""

    model_config = ConfigDict(frozen=True)

    max_cqp_solves: int = Field(default_factory=lambda: settings.max_cqp_solves, ge=1)
    min_box_width_ratio: float = Field(default_factory=lambda: settings.min_box_width_ratio, gt=0)
    workers: int = Field(default_factory=lambda: settings.bnb_workers, ge=1)
    check_invariants: bool = True


@dataclass(frozen=True)
class BoundRecord:
    """反復 k の下界 μ_k と上界 ν_k"""

    iteration: int
    lower_bound: float
    upper_bound: float


@dataclass(frozen=True)
class NodeRecord:
    """凸2次計画1回分の記録（緩和問題の値と、その解での利用者均衡目的関数値）"""

    index: int
    relaxation: float
    ue_value: float
    status: QPStatus


@dataclass
class BnBRun:
    """分枝限定法の結果"""

    status: BnBStatus
    epsilon: float
    congested_links: list[str]
    incumbent: FlowPattern | None = None
    incumbent_value: float = math.inf
    lower_bound: float = -math.inf
    iterations: int = 0
    cqp_solves: int = 0
    live_boxes: int = 0
    unreliable_nodes: int = 0
    leaf_boxes: int = 0
    anchor_offset: float = 0.0
    history: list[BoundRecord] = field(default_factory=list)
    nodes: list[NodeRecord] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.incumbent_value - self.lower_bound

    @property
    def certified(self) -> bool:
        """暫定解が ε 大域最適であることが示されたか"""
        return self.status == BnBStatus.OPTIMAL and self.gap <= self.epsilon * (1.0 + 1e-9)

    @property
    def potential(self) -> float:
        """原始関数形の目的関数値"""
        return self.incumbent_value + self.anchor_offset

    def summary(self) -> str:
        if self.status == BnBStatus.INFEASIBLE:
            return f"実行不能（凸2次計画 {self.cqp_solves}回）"
        return (
            f"{self.status.value}: 目的関数 {self.incumbent_value:.6f}, 下界 {self.lower_bound:.6f}, "
            f"ギャップ {self.gap:.3g}, 反復 {self.iterations}, 凸2次計画 {self.cqp_solves}回"
        )


# =============================================================================
# ノード問題
# =============================================================================


def root_box(network: Network, state: StateVector, config: CostConfig) -> Box:
    """渋滞リンクの流量範囲 [Δ, q_max] からなる根の箱"""
    congested = network.congested_links(state)
    return Box.from_bounds(
        [config.delta] * len(congested),
        [network.link(a).params.q_max for a in congested],
    )


def build_node_cqp(
    network: Network,
    demands: DemandTable | Sequence[Commodity],
    state: StateVector,
    box: Box | None = None,
    config: CostConfig | None = None,
    per_od: bool = False,
) -> QPProblem:
    """箱上の緩和凸2次計画

    非渋滞リンクは t_free x + αx²/2、渋滞リンクは γ(x - Δ) - β ln Δ に弦 ȳ(x) を加えた項を持ち、
    渋滞リンクの流量範囲は箱で置き換える。渋滞リンクがなければ元問題そのもの。
    """
    config = config or CostConfig()
    commodities = (
        aggregate_by_origin(demands, per_od) if isinstance(demands, DemandTable) else list(demands)
    )
    congested = network.congested_links(state)
    box = box or root_box(network, state, config)
    if box.dim != len(congested):
        raise QPStructureError(f"箱の次元 {box.dim} が渋滞リンク数 {len(congested)} と一致しません")

    nl = len(network.links)
    quad = np.zeros(nl)
    linear = np.zeros(nl)
    lower = np.zeros(nl)
    upper = np.zeros(nl)
    constant = 0.0
    position = {a: i for i, a in enumerate(congested)}
    log_delta = math.log(config.delta)

    for j, link in enumerate(network.links):
        p = link.params
        if link.id not in position:
            quad[j] = 0.5 * p.alpha
            linear[j] = p.t_free
            upper[j] = p.q_cr
            continue
        i = position[link.id]
        lo, hi = box.lower[i], box.upper[i]
        if lo < config.delta or hi > p.q_max:
            raise QPStructureError(
                f"リンク {link.id} の箱 [{lo:g}, {hi:g}] が [Δ, q_max] の外にあります"
            )
        lower[j], upper[j] = lo, hi
        if hi > lo:
            hull = secant_hull(p.beta, lo, hi)
            linear[j] = p.gamma + hull.linear_coefficient
            constant += hull.constant
        else:
            # 幅0の座標は流量が固定されるので β ln x をそのまま定数に入れる
            linear[j] = p.gamma
            constant += p.beta * math.log(lo)
        constant -= p.gamma * config.delta + p.beta * log_delta

    return build_flow_problem(network, commodities, quad, linear, lower, upper, constant)


# =============================================================================
# 分枝限定法
# =============================================================================


@dataclass
class _NodeResult:
    box: Box
    solution: QPSolution
    ue_value: float


def solve_uem_bnb(
    network: Network,
    demands: DemandTable | Sequence[Commodity],
    state: StateVector,
    epsilon: float | None = None,
    limits: BnBLimits | None = None,
    config: CostConfig | None = None,
    tolerances: QPTolerances | None = None,
    per_od: bool = False,
) -> BnBRun:
    """利用者均衡配分を分枝限定法で解く

    箱 S は ν - μ(S) <= ε で生存集合から除く。生存集合が空になれば暫定解は ε 大域最適。
    """
    epsilon = settings.epsilon if epsilon is None else epsilon
    if epsilon <= 0:
        raise ValueError(f"収束判定値 ε は正である必要があります: {epsilon}")
    limits = limits or BnBLimits()
    config = config or CostConfig()
    tolerances = tolerances or QPTolerances()
    state = network.check_state(state)
    check_cost_config(network, config)

    commodities = (
        aggregate_by_origin(demands, per_od) if isinstance(demands, DemandTable) else list(demands)
    )
    congested = network.congested_links(state)
    run = BnBRun(
        status=BnBStatus.ITERATION_LIMIT,
        epsilon=epsilon,
        congested_links=congested,
        anchor_offset=ue_anchor_offset(network, state, config),
    )
    q_range = np.array([network.link(a).params.q_max - config.delta for a in congested])

    def solve_node(box: Box) -> _NodeResult:
        problem = build_node_cqp(network, commodities, state, box, config)
        solution = solve_cqp(problem, tolerances)
        value = math.nan
        if solution.optimal and solution.flows is not None:
            value = ue_objective(network, state, solution.flows.aggregate_flows, config)
        return _NodeResult(box, solution, value)

    def record(result: _NodeResult) -> None:
        run.cqp_solves += 1
        run.nodes.append(
            NodeRecord(
                index=run.cqp_solves,
                relaxation=result.solution.objective,
                ue_value=result.ue_value,
                status=result.solution.status,
            )
        )
        sol = result.solution
        if not sol.optimal:
            return
        if limits.check_invariants:
            slack = INVARIANT_TOLERANCE * (1.0 + abs(result.ue_value))
            if sol.objective > result.ue_value + slack:
                raise BnBInvariantError(
                    f"緩和問題の値 {sol.objective:.10g} が元の目的関数値 {result.ue_value:.10g} を超えています"
                )
        if result.ue_value < run.incumbent_value:
            run.incumbent_value = result.ue_value
            run.incumbent = sol.flows

    logger.info(f"分枝限定法を開始: 渋滞リンク {len(congested)}本, ε={epsilon:g}")

    root = root_box(network, state, config)
    root_result = solve_node(root)
    record(root_result)

    if root_result.solution.status == QPStatus.INFEASIBLE:
        run.status = BnBStatus.INFEASIBLE
        logger.info("根の凸2次計画が実行不能です")
        return run
    if root_result.solution.status == QPStatus.ITERATION_LIMIT:
        run.status = BnBStatus.ITERATION_LIMIT
        logger.warning("根の凸2次計画が反復上限に達しました")
        return run

    root_bound = root_result.solution.objective
    run.iterations = 1

    # (μ, 通し番号, 箱) の最小ヒープ。同じ μ なら先に入った箱から
    live: list[tuple[float, int, Box]] = []
    seq = 0
    closed_bound = math.inf
    if congested:
        heapq.heappush(live, (root_bound, seq, root))
        seq += 1
    else:
        closed_bound = root_bound

    def current_bound() -> float:
        best_live = live[0][0] if live else math.inf
        return min(closed_bound, best_live, run.incumbent_value)

    def check_monotone(previous: BoundRecord | None, current: BoundRecord) -> None:
        if not limits.check_invariants:
            return
        slack = INVARIANT_TOLERANCE * (1.0 + abs(current.upper_bound))
        if current.lower_bound > current.upper_bound + slack:
            raise BnBInvariantError(
                f"反復 {current.iteration}: 下界 {current.lower_bound:.10g} が上界 {current.upper_bound:.10g} を超えています"
            )
        if previous is None:
            return
        if current.lower_bound < previous.lower_bound - slack:
            raise BnBInvariantError(f"反復 {current.iteration}: 下界が減少しました")
        if current.upper_bound > previous.upper_bound + slack:
            raise BnBInvariantError(f"反復 {current.iteration}: 上界が増加しました")

    def finish_status() -> BnBStatus:
        # 葉や反復上限のノードを親の μ で閉じた場合、生存集合が空でも ν - μ > ε があり得る
        gap = run.incumbent_value - current_bound()
        if gap <= epsilon * (1.0 + 1e-9):
            return BnBStatus.OPTIMAL
        logger.warning(
            f"生存集合は空ですがギャップ {gap:.3g} が ε={epsilon:g} を超えています"
            f"（最小幅の葉 {run.leaf_boxes}個, 反復上限で止まったノード {run.unreliable_nodes}）"
        )
        return BnBStatus.ITERATION_LIMIT

    first = BoundRecord(1, current_bound(), run.incumbent_value)
    check_monotone(None, first)
    run.history.append(first)

    executor = ThreadPoolExecutor(max_workers=limits.workers) if limits.workers > 1 else None
    try:
        while True:
            # ν - μ <= ε の箱を生存集合から除く
            pruned = [item for item in live if run.incumbent_value - item[0] <= epsilon]
            if pruned:
                closed_bound = min([closed_bound] + [mu for mu, _, _ in pruned])
                live = [item for item in live if run.incumbent_value - item[0] > epsilon]
                heapq.heapify(live)

            if not live:
                run.status = finish_status()
                break

            if run.cqp_solves + 2 > limits.max_cqp_solves:
                run.status = BnBStatus.ITERATION_LIMIT
                logger.warning(f"凸2次計画の上限 {limits.max_cqp_solves}回に達しました")
                break

            mu_parent, _, box = heapq.heappop(live)
            ratio = np.asarray(box.widths()) / q_range
            if float(ratio.max()) < limits.min_box_width_ratio:
                # これ以上分割しない葉。μ は下界として残るので、終了時に ν - μ <= ε を確かめ直す
                closed_bound = min(closed_bound, mu_parent)
                run.leaf_boxes += 1
                continue

            children = branch(box)
            if executor is not None:
                results = list(executor.map(solve_node, children))
            else:
                results = [solve_node(child) for child in children]

            for result in results:
                record(result)
                sol = result.solution
                if sol.status == QPStatus.INFEASIBLE:
                    continue
                if sol.status == QPStatus.ITERATION_LIMIT:
                    run.unreliable_nodes += 1
                    mu_child = mu_parent
                else:
                    mu_child = max(sol.objective, mu_parent)
                heapq.heappush(live, (mu_child, seq, result.box))
                seq += 1

            run.iterations += 1
            current = BoundRecord(run.iterations, current_bound(), run.incumbent_value)
            check_monotone(run.history[-1], current)
            run.history.append(current)
            logger.debug(
                f"反復 {current.iteration}: μ={current.lower_bound:.6f} ν={current.upper_bound:.6f} "
                f"生存 {len(live)}"
            )
    finally:
        if executor is not None:
            executor.shutdown()

    run.live_boxes = len(live)
    run.lower_bound = current_bound()
    logger.info(f"分枝限定法を終了: {run.summary()}")
    return run
