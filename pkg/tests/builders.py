"""
テスト用の小さなネットワーク
"""

from congestion_assign.core import (
    BasicParams,
    DemandEntry,
    DemandTable,
    Link,
    LinkParams,
    Network,
    build_network,
)
from congestion_assign.fdgen import derive_link_params

# v_free=80, v_cr=40, w=20, d_jam=120, r_mc=0.05, l=2 から q_max=1600, q_cr=1680, t_cr=0.05
DERIVED_BASIC = BasicParams(v_free=80, v_cr=40, w=20, d_jam=120, r_mc=0.05)
DERIVED_LENGTH = 2.0


def derived_link(link_id: str = "1-2", tail: str = "1", head: str = "2") -> Link:
    return Link(
        id=link_id,
        tail=tail,
        head=head,
        length_km=DERIVED_LENGTH,
        params=derive_link_params(DERIVED_BASIC, DERIVED_LENGTH),
    )


def plain_link(
    link_id: str,
    tail: str,
    head: str,
    t_free: float,
    alpha: float,
    q_cr: float = 1680.0,
    q_max: float = 1600.0,
    beta: float = 240.0,
    gamma: float = -0.1,
) -> Link:
    return Link(
        id=link_id,
        tail=tail,
        head=head,
        length_km=2.0,
        params=LinkParams(
            alpha=alpha, beta=beta, gamma=gamma, t_free=t_free, q_max=q_max, q_cr=q_cr
        ),
    )


def demands(*entries: tuple[str, str, float]) -> DemandTable:
    return DemandTable(
        entries=[DemandEntry(origin=o, destination=d, demand_veh_hr=q) for o, d, q in entries]
    )


def one_link_network() -> Network:
    return build_network(["1", "2"], [derived_link()], name="one_link")


def two_link_network() -> Network:
    """1→2 の並行2リンク（a: t = 0.025 + 1e-5 x、b: 係数導出リンク）"""
    return build_network(
        ["1", "2"],
        [
            plain_link("a", "1", "2", t_free=0.025, alpha=1e-5),
            derived_link("b", "1", "2"),
        ],
        name="two_link",
    )


def parallel_uncongested_network() -> Network:
    """1→2 の並行2リンク t1 = 0.025 + 1e-5 x, t2 = 0.03 + 2e-5 x"""
    return build_network(
        ["1", "2"],
        [
            plain_link("a", "1", "2", t_free=0.025, alpha=1e-5),
            plain_link("b", "1", "2", t_free=0.03, alpha=2e-5),
        ],
        name="parallel",
    )


def diamond_network() -> Network:
    """1→4 に2経路（1-2-4, 1-3-4）と横断リンク 2-3 を持つ4ノード網"""
    return build_network(
        ["1", "2", "3", "4"],
        [
            derived_link("1-2", "1", "2"),
            derived_link("1-3", "1", "3"),
            derived_link("2-3", "2", "3"),
            derived_link("2-4", "2", "4"),
            derived_link("3-4", "3", "4"),
        ],
        name="diamond",
    )
