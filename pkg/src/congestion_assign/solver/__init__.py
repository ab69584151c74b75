"""
ソルバーモジュール

凸2次計画ソルバー、配分問題の定式化、割線凸包による分枝限定法、配分の実行を提供する。
"""

from congestion_assign.solver.assign import AssignmentResult, assign, solve_som
from congestion_assign.solver.bnb import (
    BnBInvariantError,
    BnBLimits,
    BnBRun,
    BnBStatus,
    BoundRecord,
    NodeRecord,
    build_node_cqp,
    root_box,
    solve_uem_bnb,
)
from congestion_assign.solver.cqp import (
    KKTResidual,
    QPProblem,
    QPSolution,
    QPStatus,
    QPStructureError,
    QPTolerances,
    kkt_residual,
    solve_cqp,
)
from congestion_assign.solver.formulation import FlowLayout, aggregate_bounds, build_flow_problem
from congestion_assign.solver.hull import Box, DegenerateBoxError, SecantHull, branch, secant_hull

__all__ = [
    "AssignmentResult",
    "assign",
    "solve_som",
    "BnBInvariantError",
    "BnBLimits",
    "BnBRun",
    "BnBStatus",
    "BoundRecord",
    "NodeRecord",
    "build_node_cqp",
    "root_box",
    "solve_uem_bnb",
    "KKTResidual",
    "QPProblem",
    "QPSolution",
    "QPStatus",
    "QPStructureError",
    "QPTolerances",
    "kkt_residual",
    "solve_cqp",
    "FlowLayout",
    "aggregate_bounds",
    "build_flow_problem",
    "Box",
    "DegenerateBoxError",
    "SecantHull",
    "branch",
    "secant_hull",
]
