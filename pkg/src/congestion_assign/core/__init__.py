"""
コアモジュール

設定、データモデル、ネットワーク構造を提供する。
"""

from congestion_assign.core.config import settings
from congestion_assign.core.models import (
    BASIC_PARAM_ORDER,
    AssignmentModel,
    BasicParams,
    Commodity,
    CostConfig,
    DemandEntry,
    DemandTable,
    FlowPattern,
    Link,
    LinkParams,
    ParamInterval,
    ParamRanges,
    StateVector,
)
from congestion_assign.core.network import (
    Network,
    NetworkError,
    aggregate_by_origin,
    build_network,
    check_demand_nodes,
    conservation_residual,
)

__all__ = [
    "settings",
    "BASIC_PARAM_ORDER",
    "AssignmentModel",
    "BasicParams",
    "Commodity",
    "CostConfig",
    "DemandEntry",
    "DemandTable",
    "FlowPattern",
    "Link",
    "LinkParams",
    "ParamInterval",
    "ParamRanges",
    "StateVector",
    "Network",
    "NetworkError",
    "build_network",
    "aggregate_by_origin",
    "conservation_residual",
    "check_demand_nodes",
]
