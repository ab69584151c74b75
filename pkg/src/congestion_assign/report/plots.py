"""
レポートの図

リンクごとの2分岐の旅行時間-流量曲線と、進展解析の段階ごとの渋滞域を SVG で書き出す。
matplotlib と networkx（plot エクストラ）が必要。図中の文字は英字。
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import networkx as nx  # noqa: E402
import numpy as np  # noqa: E402

from congestion_assign.report.builder import LinkReport, RunReport  # noqa: E402

logger = logging.getLogger(__name__)

# 同じレポートから同じ SVG を出すための固定値
plt.rcParams["svg.hashsalt"] = "congestion-assign"
_SVG_METADATA = {"Date": None}

ZONE_COLOR = "#d62728"
BOTTLENECK_COLOR = "#ff7f0e"
FREE_COLOR = "#7f7f7f"


def _save(fig: plt.Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata=_SVG_METADATA)
    plt.close(fig)
    return path


def plot_link_curve(row: LinkReport, delta: float, path: Path) -> Path:
    """旅行時間-流量曲線（非渋滞分岐 t_free + αx と渋滞分岐 γ + β/x）"""
    p = row.params
    x_free = np.linspace(0.0, p.q_cr, 200)
    x_cong = np.linspace(min(delta, p.q_max), p.q_max, 200)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(x_free, p.t_free + p.alpha * x_free, color="#1f77b4", label="uncongested (δ=1)")
    ax.plot(x_cong, p.gamma + p.beta / x_cong, color=ZONE_COLOR, label="congested (δ=0)")
    ax.axvline(p.q_max, color=FREE_COLOR, linestyle=":", linewidth=1)
    ax.axvline(p.q_cr, color=FREE_COLOR, linestyle="--", linewidth=1)

    if row.flow is not None and row.travel_time is not None:
        ax.plot([row.flow], [row.travel_time], "o", color="black", label="assigned")

    ax.set_xlabel("flow x [veh/h]")
    ax.set_ylabel("travel time t [h]")
    ax.set_title(f"link {row.id}")
    ax.grid(alpha=0.3)
    ax.legend(loc="upper left")
    return _save(fig, path)


def link_graph(links: list[LinkReport]) -> nx.MultiDiGraph:
    """リンク表の有向多重グラフ（並行リンクは別の辺、辺のキーはリンクID）"""
    graph = nx.MultiDiGraph()
    for row in links:
        graph.add_edge(row.tail, row.head, key=row.id, id=row.id)
    return graph


def plot_zone(
    links: list[LinkReport],
    zone: list[str],
    bottleneck: list[str],
    path: Path,
    title: str = "",
) -> Path:
    """渋滞域（赤）とその段階で臨界流量に達したリンク（橙）を色分けしたネットワーク図"""
    graph = link_graph(links)
    pos = nx.kamada_kawai_layout(graph)
    zone_set, bottleneck_set = set(zone), set(bottleneck)

    fig, ax = plt.subplots(figsize=(6, 5))
    nx.draw_networkx_nodes(graph, pos, ax=ax, node_color="white", edgecolors="black")
    nx.draw_networkx_labels(graph, pos, ax=ax, font_size=9)

    # 並行リンクは曲率を変えて重ならないように描く
    drawn: dict[tuple[str, str], int] = {}
    for u, v, data in graph.edges(data=True):
        if data["id"] in bottleneck_set:
            color, width = BOTTLENECK_COLOR, 3.0
        elif data["id"] in zone_set:
            color, width = ZONE_COLOR, 3.0
        else:
            color, width = FREE_COLOR, 1.0
        order = drawn.get((u, v), 0)
        drawn[(u, v)] = order + 1
        nx.draw_networkx_edges(
            graph,
            pos,
            edgelist=[(u, v)],
            ax=ax,
            edge_color=color,
            width=width,
            arrows=True,
            connectionstyle=f"arc3,rad={0.12 + 0.2 * order:.2f}",
        )
    ax.set_title(title)
    ax.set_axis_off()
    return _save(fig, path)


def write_plots(report: RunReport, out_dir: Path) -> list[Path]:
    """レポートの図をすべて書き出す"""
    written: list[Path] = []
    for row in report.links:
        written.append(
            plot_link_curve(row, report.config.delta, out_dir / f"link_{row.id}.svg")
        )

    if report.levels:
        for level in report.levels:
            title = f"scenario {level.index} ({level.status.value})"
            written.append(
                plot_zone(
                    report.links,
                    level.congested,
                    level.bottleneck,
                    out_dir / f"zone_level{level.index}.svg",
                    title,
                )
            )
    else:
        congested = [row.id for row in report.links if row.state == 0]
        written.append(
            plot_zone(report.links, congested, [], out_dir / "zone.svg", report.network)
        )

    logger.info(f"図を {len(written)}枚書き出しました: {out_dir}")
    return written
