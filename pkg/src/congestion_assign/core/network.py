"""
ネットワーク構造

有向グラフの構築、接続関係（流入・流出リンク集合）、起点別の品種集約、
フロー保存則の残差計算を提供する。
"""

import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

from congestion_assign.core.models import Commodity, DemandTable, Link, StateVector

logger = logging.getLogger(__name__)


class NetworkError(ValueError):
    """ネットワーク構造エラー"""

    def __init__(self, message: str, link_id: str | None = None):
        super().__init__(message)
        self.link_id = link_id


@dataclass(frozen=True)
class Network:
    """有向ネットワーク（構築後は不変）

    外部IDは文字列、内部では nodes / links の並び順を密な整数インデックスとして使う。
    """

    nodes: tuple[str, ...]
    links: tuple[Link, ...]
    inbound: Mapping[str, tuple[str, ...]]
    outbound: Mapping[str, tuple[str, ...]]
    node_index: Mapping[str, int]
    link_index: Mapping[str, int]
    name: str = ""
    meta: Mapping[str, object] = field(default_factory=lambda: MappingProxyType({}))

    @property
    def link_ids(self) -> tuple[str, ...]:
        return tuple(link.id for link in self.links)

    def link(self, link_id: str) -> Link:
        try:
            return self.links[self.link_index[link_id]]
        except KeyError:
            raise NetworkError(f"未定義のリンクです: {link_id}", link_id) from None

    def uncongested_state(self) -> StateVector:
        return StateVector.all_uncongested(self.link_ids)

    def check_state(self, state: StateVector) -> StateVector:
        """状態ベクトルがちょうど全リンクを覆うことを確認し、リンク順に並べ直す"""
        unknown = [a for a in state.states if a not in self.link_index]
        if unknown:
            raise NetworkError(f"状態ベクトルに未定義のリンクがあります: {unknown[0]}", unknown[0])
        missing = [a for a in self.link_ids if a not in state.states]
        if missing:
            raise NetworkError(f"状態ベクトルにリンク {missing[0]} がありません", missing[0])
        return StateVector(states={a: state.states[a] for a in self.link_ids})

    def congested_links(self, state: StateVector) -> list[str]:
        """渋滞状態のリンクをリンク順で返す"""
        return [a for a in self.link_ids if state.states[a] == 0]


def build_network(
    nodes: Iterable[str],
    links: Iterable[Link],
    name: str = "",
    meta: Mapping[str, object] | None = None,
) -> Network:
    """ノードとリンクからネットワークを構築する"""
    node_list: list[str] = []
    for node in nodes:
        if node in node_list:
            raise NetworkError(f"ノード {node} が重複しています")
        node_list.append(node)
    declared = set(node_list)

    link_list = list(links)
    inbound: dict[str, list[str]] = {n: [] for n in node_list}
    outbound: dict[str, list[str]] = {n: [] for n in node_list}
    link_index: dict[str, int] = {}

    for i, link in enumerate(link_list):
        if link.id in link_index:
            raise NetworkError(f"リンクID {link.id} が重複しています", link.id)
        for endpoint in (link.tail, link.head):
            if endpoint not in declared:
                raise NetworkError(
                    f"リンク {link.id} の端点 {endpoint} が未定義のノードです", link.id
                )
        if link.tail == link.head:
            raise NetworkError(f"リンク {link.id} の始点と終点が同じです", link.id)
        link_index[link.id] = i
        outbound[link.tail].append(link.id)
        inbound[link.head].append(link.id)

    logger.debug(f"ネットワーク構築: {len(node_list)}ノード, {len(link_list)}リンク")

    return Network(
        nodes=tuple(node_list),
        links=tuple(link_list),
        inbound=MappingProxyType({n: tuple(v) for n, v in inbound.items()}),
        outbound=MappingProxyType({n: tuple(v) for n, v in outbound.items()}),
        node_index=MappingProxyType({n: i for i, n in enumerate(node_list)}),
        link_index=MappingProxyType(link_index),
        name=name,
        meta=MappingProxyType(dict(meta or {})),
    )


# =============================================================================
# 需要・品種
# =============================================================================


def aggregate_by_origin(demands: DemandTable, per_od: bool = False) -> list[Commodity]:
    """OD需要を起点ごとの品種にまとめる

    目的関数は集計リンク流量のみに依存するため、同じ起点を持つOD対をまとめても
    集計流量の実行可能集合は変わらない。per_od=True ではOD対ごとに品種を作る。
    需要0のOD対は品種に含めない。
    """
    grouped: dict[str, tuple[str, dict[str, float]]] = {}
    for entry in demands.entries:
        if entry.demand_veh_hr == 0:
            continue
        key = f"{entry.origin}->{entry.destination}" if per_od else entry.origin
        _, targets = grouped.setdefault(key, (entry.origin, {}))
        targets[entry.destination] = targets.get(entry.destination, 0.0) + entry.demand_veh_hr

    return [
        Commodity(key=key, origin=origin, demands=targets)
        for key, (origin, targets) in grouped.items()
    ]


def conservation_residual(
    network: Network,
    commodity: Commodity,
    flows: Mapping[str, float],
) -> dict[str, float]:
    """ノードごとのフロー保存則残差

    残差 = 流出量 - 流入量 - 正味供給量。実行可能な流量なら全ノードで 0 となる。
    """
    missing = [a for a in network.link_ids if a not in flows]
    if missing:
        raise NetworkError(f"リンク {missing[0]} の流量がありません", missing[0])

    residual: dict[str, float] = {}
    for node in network.nodes:
        out_sum = math.fsum(flows[a] for a in network.outbound[node])
        in_sum = math.fsum(flows[a] for a in network.inbound[node])
        residual[node] = out_sum - in_sum - commodity.net_supply(node)
    return residual


def check_demand_nodes(network: Network, demands: DemandTable) -> None:
    """OD需要の起終点がネットワークに存在することを確認する"""
    for node in sorted(demands.nodes()):
        if node not in network.node_index:
            raise NetworkError(f"需要のノード {node} がネットワークにありません")
