"""
レポートの表示

RunReport を rich のテーブルで表示する。
"""

from rich.console import Console
from rich.table import Table

from congestion_assign.fdgen.consistency import ConsistencyReport
from congestion_assign.report.builder import BoundReport, RunReport


def _num(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:,.{digits}f}"


def config_table(report: RunReport) -> Table:
    """設定値の表"""
    cfg = report.config
    table = Table(title="設定")
    table.add_column("項目", style="cyan")
    table.add_column("値", justify="right")
    table.add_row("ネットワーク", report.network or "-")
    table.add_row("モデル", cfg.model.value.upper())
    table.add_row("ε", f"{cfg.epsilon:g}")
    table.add_row("Δ（台/時）", f"{cfg.delta:g}")
    if cfg.seed is not None:
        table.add_row("シード", str(cfg.seed))
    if cfg.per_od:
        table.add_row("品種", "ODペア単位")
    return table


def link_table(report: RunReport) -> Table:
    """リンク流量の表"""
    table = Table(title="リンク流量")
    table.add_column("リンク", style="cyan")
    table.add_column("状態")
    table.add_column("流量", justify="right", style="green")
    table.add_column("上限", justify="right")
    table.add_column("利用率", justify="right")
    table.add_column("旅行時間", justify="right")

    for row in report.links:
        congested = row.state == 0
        cap = row.params.q_max if congested else row.params.q_cr
        ratio = row.utilization
        at_limit = ratio is not None and ratio >= 1.0 - 1e-6
        table.add_row(
            row.id,
            "[red]渋滞[/red]" if congested else "非渋滞",
            _num(row.flow, 3),
            f"{cap:,.3f}",
            "-" if ratio is None else f"[yellow]{ratio:.3f}[/yellow]" if at_limit else f"{ratio:.3f}",
            _num(row.travel_time, 5),
        )
    return table


def bound_table(bnb: BoundReport) -> Table:
    """分枝限定法の上下界の推移"""
    table = Table(title="上下界の推移")
    table.add_column("反復", justify="right")
    table.add_column("下界 μ", justify="right", style="cyan")
    table.add_column("上界 ν", justify="right", style="green")
    table.add_column("差", justify="right")
    for h in bnb.history:
        gap = (
            None
            if h.lower_bound is None or h.upper_bound is None
            else h.upper_bound - h.lower_bound
        )
        table.add_row(str(h.iteration), _num(h.lower_bound), _num(h.upper_bound), _num(gap, 6))

    table.add_section()
    table.add_row(
        "[bold]終了[/bold]",
        _num(bnb.lower_bound),
        _num(bnb.upper_bound),
        _num(bnb.gap, 6),
    )
    return table


def level_table(report: RunReport) -> Table:
    """進展解析の段階ごとの結果"""
    table = Table(title="渋滞域の進展")
    table.add_column("シナリオ", justify="right")
    table.add_column("状態")
    table.add_column("目的関数", justify="right", style="green")
    table.add_column("原始関数形", justify="right")
    table.add_column("ボトルネック", style="yellow")
    table.add_column("渋滞域", style="red")
    for level in report.levels:
        table.add_row(
            str(level.index),
            level.status.value,
            _num(level.objective),
            _num(level.potential, 2),
            ", ".join(level.bottleneck) or "-",
            ", ".join(level.zone) or "-",
        )
    return table


def consistency_table(reports: list[ConsistencyReport]) -> Table:
    """係数の整合性検査の表"""
    table = Table(title="係数の整合性")
    table.add_column("リンク", style="cyan")
    table.add_column("結果")
    table.add_column("連続性の残差", justify="right")
    table.add_column("指摘")
    for report in reports:
        if not report.ok:
            verdict = "[red]✗ エラー[/red]"
        elif report.warnings:
            verdict = "[yellow]△ 範囲外[/yellow]"
        else:
            verdict = "[green]✓[/green]"
        continuity = report.check("continuity")
        issues = [c.name for c in report.failures + report.warnings]
        table.add_row(
            report.link_id,
            verdict,
            f"{continuity.residual:.2e}",
            ", ".join(issues) or "-",
        )
    return table


def render_report(report: RunReport, console: Console, show_nodes: bool = False) -> None:
    """RunReport の内容を表示"""
    console.print(config_table(report))
    console.print(link_table(report))

    if report.bnb is not None:
        bnb = report.bnb
        console.print(bound_table(bnb))
        certificate = "[green]ε 大域最適[/green]" if bnb.certified else "[yellow]未保証[/yellow]"
        console.print(
            f"  {certificate}: 反復 {bnb.iterations}, 凸2次計画 {bnb.cqp_solves}回, "
            f"生存ボックス {bnb.live_boxes}, 反復上限で止まったノード {bnb.unreliable_nodes}, "
            f"最小幅の葉 {bnb.leaf_boxes}"
        )
        if show_nodes and bnb.nodes:
            nodes = Table(title="凸2次計画の記録")
            nodes.add_column("番号", justify="right")
            nodes.add_column("緩和問題", justify="right", style="cyan")
            nodes.add_column("利用者均衡", justify="right", style="green")
            nodes.add_column("状態")
            for n in bnb.nodes:
                nodes.add_row(str(n.index), _num(n.relaxation), _num(n.ue_value), n.status.value)
            console.print(nodes)

    if report.levels:
        console.print(level_table(report))

    if report.kind == "evolve":
        console.print(f"[bold]判定:[/bold] {report.status}")
    elif report.objective is not None:
        console.print(
            f"[bold]目的関数:[/bold] {report.objective:,.6f}（原始関数形 {_num(report.potential, 2)}）"
        )
        if report.reference is not None:
            ref = report.reference
            mark = "[green]✓[/green]" if not ref.flagged else "[yellow]⚠[/yellow]"
            console.print(
                f"  {mark} 参照値 {ref.reference:,.2f} との相対差 {ref.relative_difference:+.2%}"
                f"（{ref.verdict.value}）"
            )
    else:
        console.print(f"[bold]状態:[/bold] {report.status}")
