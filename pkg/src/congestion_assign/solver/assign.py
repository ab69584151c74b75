"""
配分の実行

システム最適配分（凸2次計画1回）と利用者均衡配分（分枝限定法）を共通の結果形式で返す。
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from congestion_assign.core.models import (
    AssignmentModel,
    Commodity,
    CostConfig,
    DemandTable,
    FlowPattern,
    StateVector,
)
from congestion_assign.core.network import Network, aggregate_by_origin
from congestion_assign.cost.functions import (
    check_cost_config,
    link_travel_times,
    so_objective,
    ue_anchor_offset,
    ue_objective,
)
from congestion_assign.solver.bnb import BnBLimits, BnBRun, BnBStatus, solve_uem_bnb
from congestion_assign.solver.cqp import QPStatus, QPTolerances, solve_cqp
from congestion_assign.solver.formulation import aggregate_bounds, build_flow_problem

logger = logging.getLogger(__name__)

_QP_TO_RUN_STATUS = {
    QPStatus.OPTIMAL: BnBStatus.OPTIMAL,
    QPStatus.INFEASIBLE: BnBStatus.INFEASIBLE,
    QPStatus.ITERATION_LIMIT: BnBStatus.ITERATION_LIMIT,
}


@dataclass
class AssignmentResult:
    """配分結果

    objective は選んだモデルの目的関数値（利用者均衡は積分形）、potential は原始関数形の値。
    """

    model: AssignmentModel
    status: BnBStatus
    state: StateVector
    flows: FlowPattern | None = None
    objective: float = math.nan
    potential: float = math.nan
    cqp_solves: int = 0
    travel_times: dict[str, float] = field(default_factory=dict)
    bnb: BnBRun | None = None

    @property
    def feasible(self) -> bool:
        return self.status != BnBStatus.INFEASIBLE

    def summary(self) -> str:
        if self.status == BnBStatus.INFEASIBLE:
            return f"{self.model.value.upper()}: 実行不能"
        return f"{self.model.value.upper()} ({self.status.value}): 目的関数 {self.objective:.6f}"


def _commodities(demands: DemandTable | Sequence[Commodity], per_od: bool) -> list[Commodity]:
    if isinstance(demands, DemandTable):
        return aggregate_by_origin(demands, per_od)
    return list(demands)


def solve_som(
    network: Network,
    demands: DemandTable | Sequence[Commodity],
    state: StateVector,
    config: CostConfig | None = None,
    tolerances: QPTolerances | None = None,
    per_od: bool = False,
) -> AssignmentResult:
    """システム最適配分

    非渋滞リンクは t_free x + αx²、渋滞リンクは γx + β（線形）の凸2次計画を1回解く。
    """
    config = config or CostConfig()
    state = network.check_state(state)
    check_cost_config(network, config)

    nl = len(network.links)
    quad = np.zeros(nl)
    linear = np.zeros(nl)
    constant = 0.0
    for j, link in enumerate(network.links):
        p = link.params
        if state.states[link.id] == 1:
            quad[j] = p.alpha
            linear[j] = p.t_free
        else:
            linear[j] = p.gamma
            constant += p.beta
    lower, upper = aggregate_bounds(network, state, config)
    problem = build_flow_problem(
        network, _commodities(demands, per_od), quad, linear, lower, upper, constant
    )
    solution = solve_cqp(problem, tolerances)

    result = AssignmentResult(
        model=AssignmentModel.SO,
        status=_QP_TO_RUN_STATUS[solution.status],
        state=state,
        cqp_solves=1,
    )
    if solution.status == QPStatus.INFEASIBLE or solution.flows is None:
        logger.info("システム最適配分: 実行不能")
        return result

    flows = solution.flows.aggregate_flows
    result.flows = solution.flows
    result.objective = so_objective(network, state, flows, config)
    result.potential = result.objective
    result.travel_times = link_travel_times(network, state, flows, config)
    logger.info(f"システム最適配分: {result.summary()}")
    return result


def assign(
    network: Network,
    demands: DemandTable | Sequence[Commodity],
    state: StateVector | None = None,
    model: AssignmentModel = AssignmentModel.UE,
    epsilon: float | None = None,
    config: CostConfig | None = None,
    limits: BnBLimits | None = None,
    tolerances: QPTolerances | None = None,
    per_od: bool = False,
) -> AssignmentResult:
    """指定したモデルで配分する（状態を省略すると全リンク非渋滞）"""
    config = config or CostConfig()
    state = state or network.uncongested_state()
    commodities = _commodities(demands, per_od)

    if model == AssignmentModel.SO:
        return solve_som(network, commodities, state, config, tolerances)

    run = solve_uem_bnb(network, commodities, state, epsilon, limits, config, tolerances)
    result = AssignmentResult(
        model=AssignmentModel.UE,
        status=run.status,
        state=network.check_state(state),
        cqp_solves=run.cqp_solves,
        bnb=run,
    )
    if run.incumbent is None:
        return result

    flows = run.incumbent.aggregate_flows
    result.flows = run.incumbent
    result.objective = ue_objective(network, result.state, flows, config)
    result.potential = result.objective + ue_anchor_offset(network, result.state, config)
    result.travel_times = link_travel_times(network, result.state, flows, config)
    logger.info(f"利用者均衡配分: {result.summary()}")
    return result
