"""
渋滞域進展モジュール
"""

from congestion_assign.evolution.runner import (
    DispersionStep,
    EvolutionBudgetError,
    EvolutionLevel,
    EvolutionReport,
    Verdict,
    VerdictKind,
    detect_bottleneck,
    disperse,
    evolve,
    replay_level,
)

__all__ = [
    "DispersionStep",
    "EvolutionBudgetError",
    "EvolutionLevel",
    "EvolutionReport",
    "Verdict",
    "VerdictKind",
    "detect_bottleneck",
    "disperse",
    "evolve",
    "replay_level",
]
