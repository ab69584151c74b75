"""
ネットワーク配分問題の定式化

品種別リンク流量 x_a^b と集計リンク流量 x_a を変数とし、フロー保存則と集計式を等式制約、
リンクの流量上下限を集計変数の上下限として凸2次計画問題を組み立てる。
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from congestion_assign.core.models import Commodity, CostConfig, FlowPattern, StateVector
from congestion_assign.core.network import Network
from congestion_assign.solver.cqp import QPProblem, QPStructureError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowLayout:
    """変数ベクトルの並び（品種 k・リンク j の変数は k*nl + j、集計変数は nk*nl + j）"""

    link_ids: tuple[str, ...]
    commodity_keys: tuple[str, ...]

    @property
    def n_links(self) -> int:
        return len(self.link_ids)

    @property
    def n_commodities(self) -> int:
        return len(self.commodity_keys)

    @property
    def n_vars(self) -> int:
        return (self.n_commodities + 1) * self.n_links

    def commodity_index(self, k: int, j: int) -> int:
        return k * self.n_links + j

    def aggregate_index(self, j: int) -> int:
        return self.n_commodities * self.n_links + j

    def aggregate(self, x: np.ndarray) -> np.ndarray:
        return x[self.n_commodities * self.n_links :]

    def to_flow_pattern(self, x: np.ndarray) -> FlowPattern:
        nl = self.n_links
        commodity_flows = {
            key: {a: float(x[k * nl + j]) for j, a in enumerate(self.link_ids)}
            for k, key in enumerate(self.commodity_keys)
        }
        agg = self.aggregate(x)
        return FlowPattern(
            commodity_flows=commodity_flows,
            aggregate_flows={a: float(agg[j]) for j, a in enumerate(self.link_ids)},
        )


def aggregate_bounds(
    network: Network, state: StateVector, config: CostConfig
) -> tuple[np.ndarray, np.ndarray]:
    """状態に応じた集計流量の上下限（非渋滞 [0, q_cr]、渋滞 [Δ, q_max]）"""
    lower = np.zeros(len(network.links))
    upper = np.zeros(len(network.links))
    for j, link in enumerate(network.links):
        if state.states[link.id] == 1:
            lower[j], upper[j] = 0.0, link.params.q_cr
        else:
            lower[j], upper[j] = config.delta, link.params.q_max
    return lower, upper


def build_flow_problem(
    network: Network,
    commodities: Sequence[Commodity],
    quad: np.ndarray,
    linear: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    constant: float = 0.0,
) -> QPProblem:
    """集計リンク流量の目的関数・上下限から配分の凸2次計画問題を作る

    各品種の起点ノードの保存則は他の行の和から従うため除く。
    """
    nl = len(network.links)
    for name, arr in (("quad", quad), ("linear", linear), ("lower", lower), ("upper", upper)):
        if np.asarray(arr).size != nl:
            raise QPStructureError(f"{name} の長さ {np.asarray(arr).size} がリンク数 {nl} と一致しません")

    active = [c for c in commodities if c.total > 0]
    layout = FlowLayout(
        link_ids=network.link_ids,
        commodity_keys=tuple(c.key for c in active),
    )
    nk = layout.n_commodities

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    rhs: list[float] = []

    # フロー保存則: 流出 - 流入 = 正味供給
    for k, commodity in enumerate(active):
        for node in network.nodes:
            if node == commodity.origin:
                continue
            out_links = network.outbound[node]
            in_links = network.inbound[node]
            supply = commodity.net_supply(node)
            if not out_links and not in_links and supply == 0:
                continue
            r = len(rhs)
            for a in out_links:
                rows.append(r)
                cols.append(layout.commodity_index(k, network.link_index[a]))
                vals.append(1.0)
            for a in in_links:
                rows.append(r)
                cols.append(layout.commodity_index(k, network.link_index[a]))
                vals.append(-1.0)
            rhs.append(supply)

    # 集計式: Σ_b x_a^b - x_a = 0
    for j in range(nl):
        r = len(rhs)
        for k in range(nk):
            rows.append(r)
            cols.append(layout.commodity_index(k, j))
            vals.append(1.0)
        rows.append(r)
        cols.append(layout.aggregate_index(j))
        vals.append(-1.0)
        rhs.append(0.0)

    n = layout.n_vars
    a_eq = sp.csr_matrix((vals, (rows, cols)), shape=(len(rhs), n))

    full_quad = np.zeros(n)
    full_lin = np.zeros(n)
    full_lo = np.zeros(n)
    full_hi = np.full(n, np.inf)
    agg = slice(nk * nl, n)
    full_quad[agg] = quad
    full_lin[agg] = linear
    full_lo[agg] = lower
    full_hi[agg] = upper

    logger.debug(f"定式化: 変数 {n}, 等式制約 {len(rhs)}, 品種 {nk}")

    return QPProblem(
        quad=full_quad,
        linear=full_lin,
        a_eq=a_eq,
        b_eq=np.asarray(rhs, dtype=float),
        lower=full_lo,
        upper=full_hi,
        constant=constant,
        layout=layout,
    )
