"""
旅行時間関数と目的関数

2分岐のリンク旅行時間関数と、システム最適（総旅行時間）・利用者均衡（Beckmann型積分）の
目的関数を閉形式で評価する。時間は hr、流量は 台/時。
"""

import logging
import math
from collections.abc import Mapping

from congestion_assign.core.config import settings
from congestion_assign.core.models import CostConfig, Link, StateVector
from congestion_assign.core.network import Network

logger = logging.getLogger(__name__)

# 分岐の定義域判定に許す絶対誤差（台/時）
DOMAIN_SLACK = 1e-6


class CostDomainError(ValueError):
    """分岐の定義域外での評価"""

    def __init__(self, message: str, link_id: str | None = None, bound: str | None = None):
        super().__init__(message)
        self.link_id = link_id
        self.bound = bound


def _delta(config: CostConfig | None) -> float:
    return config.delta if config is not None else settings.delta


def check_cost_config(network: Network, config: CostConfig) -> None:
    """0 < Δ < min q_max を確認する"""
    for link in network.links:
        if config.delta >= link.params.q_max:
            raise CostDomainError(
                f"Δ={config.delta:g} がリンク {link.id} の q_max={link.params.q_max:g} 以上です",
                link.id,
                "delta",
            )


# =============================================================================
# リンク旅行時間
# =============================================================================


def tt_uncongested(link: Link, x: float) -> float:
    """非渋滞分岐 t_free + αx（0 <= x <= q_cr）"""
    p = link.params
    if x < -DOMAIN_SLACK:
        raise CostDomainError(f"リンク {link.id}: 流量 {x:g} が負です", link.id, "zero")
    if x > p.q_cr + DOMAIN_SLACK:
        raise CostDomainError(
            f"リンク {link.id}: 流量 {x:g} が臨界流量 q_cr={p.q_cr:g} を超えています",
            link.id,
            "q_cr",
        )
    return p.t_free + p.alpha * x


def tt_congested(link: Link, x: float, config: CostConfig | None = None) -> float:
    """渋滞分岐 γ + β/x（Δ <= x <= q_max）"""
    p = link.params
    delta = _delta(config)
    if x < delta - DOMAIN_SLACK:
        raise CostDomainError(
            f"リンク {link.id}: 流量 {x:g} が下限 Δ={delta:g} を下回っています", link.id, "delta"
        )
    if x > p.q_max + DOMAIN_SLACK:
        raise CostDomainError(
            f"リンク {link.id}: 流量 {x:g} が最大流量 q_max={p.q_max:g} を超えています",
            link.id,
            "q_max",
        )
    return p.gamma + p.beta / x


def link_travel_times(
    network: Network,
    state: StateVector,
    flows: Mapping[str, float],
    config: CostConfig | None = None,
) -> dict[str, float]:
    """状態が指定する分岐でのリンク旅行時間（ue_objective の勾配）"""
    times: dict[str, float] = {}
    for link in network.links:
        x = flows[link.id]
        if state.states[link.id] == 1:
            times[link.id] = tt_uncongested(link, x)
        else:
            times[link.id] = tt_congested(link, x, config)
    return times


# =============================================================================
# 目的関数
# =============================================================================


def so_objective(
    network: Network,
    state: StateVector,
    flows: Mapping[str, float],
    config: CostConfig | None = None,
) -> float:
    """総旅行時間 Σ x_a t_a(x_a)

    渋滞リンクの項は x(γ + β/x) = γx + β で x について線形。
    """
    terms: list[float] = []
    for link in network.links:
        x = flows[link.id]
        p = link.params
        if state.states[link.id] == 1:
            tt_uncongested(link, x)
            terms.append(p.t_free * x + p.alpha * x * x)
        else:
            tt_congested(link, x, config)
            terms.append(p.gamma * x + p.beta)
    return math.fsum(terms)


def ue_objective(
    network: Network,
    state: StateVector,
    flows: Mapping[str, float],
    config: CostConfig | None = None,
) -> float:
    """Beckmann型目的関数 Σ ∫ t_a

    非渋滞リンクは 0 から x まで、渋滞リンクは Δ から x までの積分。
    """
    delta = _delta(config)
    terms: list[float] = []
    for link in network.links:
        x = flows[link.id]
        p = link.params
        if state.states[link.id] == 1:
            tt_uncongested(link, x)
            terms.append(p.t_free * x + 0.5 * p.alpha * x * x)
        else:
            tt_congested(link, x, config)
            terms.append(p.gamma * (x - delta) + p.beta * math.log(x / delta))
    return math.fsum(terms)


def ue_potential(
    network: Network,
    state: StateVector,
    flows: Mapping[str, float],
    config: CostConfig | None = None,
) -> float:
    """下端の定数を含まない原始関数形の利用者均衡目的関数

    渋滞リンクの項を γx + β ln x とした値。ue_objective との差は状態のみで決まる定数
    （ue_anchor_offset）で、最小解は一致する。
    """
    terms: list[float] = []
    for link in network.links:
        x = flows[link.id]
        p = link.params
        if state.states[link.id] == 1:
            tt_uncongested(link, x)
            terms.append(p.t_free * x + 0.5 * p.alpha * x * x)
        else:
            tt_congested(link, x, config)
            terms.append(p.gamma * x + p.beta * math.log(x))
    return math.fsum(terms)


def ue_anchor_offset(
    network: Network,
    state: StateVector,
    config: CostConfig | None = None,
) -> float:
    """ue_potential - ue_objective = Σ_渋滞 (γΔ + β ln Δ)"""
    delta = _delta(config)
    return math.fsum(
        link.params.gamma * delta + link.params.beta * math.log(delta)
        for link in network.links
        if state.states[link.id] == 0
    )


def bound_violations(
    network: Network,
    state: StateVector,
    flows: Mapping[str, float],
    config: CostConfig | None = None,
    tolerance: float = 1e-6,
) -> list[str]:
    """流量上下限（非渋滞 0..q_cr、渋滞 Δ..q_max）に違反するリンク"""
    delta = _delta(config)
    violated: list[str] = []
    for link in network.links:
        x = flows[link.id]
        p = link.params
        if state.states[link.id] == 1:
            lo, hi = 0.0, p.q_cr
        else:
            lo, hi = delta, p.q_max
        if x < lo - tolerance or x > hi + tolerance:
            violated.append(link.id)
    return violated
