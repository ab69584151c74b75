"""
旅行時間・目的関数モジュール
"""

from congestion_assign.cost.functions import (
    CostDomainError,
    bound_violations,
    check_cost_config,
    link_travel_times,
    so_objective,
    tt_congested,
    tt_uncongested,
    ue_anchor_offset,
    ue_objective,
    ue_potential,
)

__all__ = [
    "CostDomainError",
    "check_cost_config",
    "tt_uncongested",
    "tt_congested",
    "link_travel_times",
    "so_objective",
    "ue_objective",
    "ue_potential",
    "ue_anchor_offset",
    "bound_violations",
]
