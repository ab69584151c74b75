"""
CLI メインモジュール

congest-cli コマンドのエントリーポイント。

終了コード: 0 成功, 1 入力エラー, 2 実行不能・機能不全, 3 計算上限に到達
"""

import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from congestion_assign.core import (
    BASIC_PARAM_ORDER,
    AssignmentModel,
    CostConfig,
    build_network,
    check_demand_nodes,
    settings,
)
from congestion_assign.evolution import EvolutionBudgetError, VerdictKind, evolve
from congestion_assign.fdgen import RNG_ALGORITHM, generate_links
from congestion_assign.ingest import (
    InputFileError,
    check_network,
    load_demands,
    load_network,
    load_ranges,
    load_state,
    load_topology,
    write_network,
)
from congestion_assign.report import (
    ReportConfig,
    RunReport,
    build_assign_report,
    build_evolve_report,
    consistency_table,
    dump_report,
    load_report,
    render_report,
    write_report,
)
from congestion_assign.solver import BnBLimits, BnBStatus, assign

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_BUDGET = 3


def setup_logging(level: str = "INFO") -> None:
    """ログ設定"""
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, rich_tracebacks=True)],
    )


def _input_error(e: Exception) -> NoReturn:
    err_console.print(f"[red]エラー:[/red] {e}")
    sys.exit(EXIT_INPUT_ERROR)


def _emit(report: RunReport, output: Path | None, output_json: bool, show_nodes: bool) -> None:
    if output is not None:
        write_report(output, report)
    if output_json:
        click.echo(dump_report(report), nl=False)
    else:
        render_report(report, console, show_nodes=show_nodes)
        if output is not None:
            console.print(f"[green]✓[/green] {output} に保存しました")


model_option = click.option(
    "--model",
    type=click.Choice(["ue", "so"]),
    default="ue",
    help="配分モデル（ue: 利用者均衡, so: システム最適）",
)
epsilon_option = click.option(
    "--epsilon", type=float, default=None, help="分枝限定法の収束判定値 ε（既定 0.001）"
)
delta_option = click.option(
    "--delta", type=float, default=None, help="渋滞リンク流量の下限 Δ 台/時（既定 60）"
)
budget_option = click.option(
    "--max-cqp-solves", type=int, default=None, help="1回の分枝限定法で解く凸2次計画の上限（既定 10000）"
)


def _limits(workers: int | None, max_cqp_solves: int | None) -> BnBLimits:
    overrides: dict[str, int] = {}
    if workers is not None:
        overrides["workers"] = workers
    if max_cqp_solves is not None:
        overrides["max_cqp_solves"] = max_cqp_solves
    return BnBLimits(**overrides)


@click.group()
@click.option("--debug", is_flag=True, help="デバッグモードを有効化")
@click.pass_context
def cli(ctx: click.Context, debug: bool) -> None:
    """渋滞リンク対応 交通量配分 CLI"""
    ctx.ensure_object(dict)
    log_level = "DEBUG" if debug else settings.log_level
    setup_logging(log_level)


# =============================================================================
# gen コマンド
# =============================================================================


@cli.command()
@click.option(
    "--topology",
    "-t",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="トポロジーファイル（ノードとリンク長）",
)
@click.option("--seed", type=int, default=None, help="乱数シード")
@click.option(
    "--ranges",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="基本パラメータの範囲ファイル",
)
@click.option(
    "--output", "-o", type=click.Path(path_type=Path), required=True, help="出力ネットワークファイル"
)
def gen(topology: Path, seed: int | None, ranges: Path | None, output: Path) -> None:
    """基本パラメータを乱数で生成し、係数付きネットワークファイルを作成"""
    try:
        spec = load_topology(topology)
        param_ranges = load_ranges(ranges)
        seed = settings.default_seed if seed is None else seed
        links, basics = generate_links(spec.links, param_ranges, seed)
        network = build_network(spec.nodes, links, name=spec.name or output.stem)
    except (InputFileError, ValueError) as e:
        _input_error(e)

    meta = {
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "ranges": {
            name: [param_ranges.interval(name).lo, param_ranges.interval(name).hi]
            for name in BASIC_PARAM_ORDER
        },
        "basic": {link_id: b.model_dump() for link_id, b in basics.items()},
    }
    write_network(output, network, meta=meta)

    failures = [r for r in check_network(network, param_ranges) if not r.ok]
    console.print(
        f"[green]✓[/green] {len(network.links)}リンクの係数を生成しました: {output} (seed={seed})"
    )
    if failures:
        console.print(f"[yellow]⚠ 整合性エラーのリンク: {', '.join(r.link_id for r in failures)}[/yellow]")


# =============================================================================
# validate コマンド
# =============================================================================


@cli.command()
@click.argument("network_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--ranges",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="基本パラメータの範囲ファイル",
)
def validate(network_path: Path, ranges: Path | None) -> None:
    """ネットワークファイルの係数の整合性を検査"""
    try:
        param_ranges = load_ranges(ranges)
        network = load_network(network_path, param_ranges, strict=False)
    except (InputFileError, ValueError) as e:
        _input_error(e)

    reports = check_network(network, param_ranges)
    console.print(consistency_table(reports))

    failures = [r for r in reports if not r.ok]
    warnings = sum(1 for r in reports if r.warnings)
    if failures:
        err_console.print(f"[red]✗[/red] 整合性エラー {len(failures)}リンク")
        sys.exit(EXIT_INPUT_ERROR)
    console.print(f"[green]✓[/green] 全{len(reports)}リンク整合（範囲外の警告 {warnings}リンク）")


# =============================================================================
# assign コマンド
# =============================================================================


@cli.command("assign")
@click.option(
    "--network", "-n", "network_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="ネットワークファイル",
)
@click.option(
    "--demands", "-d", "demands_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="OD需要ファイル",
)
@click.option(
    "--state", "-s", "state_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="リンク状態ファイル（省略時は全リンク非渋滞）",
)
@model_option
@epsilon_option
@delta_option
@budget_option
@click.option("--per-od", is_flag=True, help="ODペアごとに品種を分ける")
@click.option("--workers", type=int, default=None, help="兄弟ノードを並行に解くワーカー数")
@click.option("--output", "-o", type=click.Path(path_type=Path), default=None, help="レポートの出力先（JSON）")
@click.option("--json", "output_json", is_flag=True, help="レポートを JSON で標準出力に出す")
@click.option("--no-meta", is_flag=True, help="レポートに生成時刻などを含めない")
@click.option(
    "--reference-potential",
    type=float,
    default=None,
    help="原始関数形の目的関数の参照値（相対差 1% を超えればレポートに印を付ける）",
)
@click.option("--show-nodes", is_flag=True, help="凸2次計画ごとの記録も表示")
def assign_cmd(
    network_path: Path,
    demands_path: Path,
    state_path: Path | None,
    model: str,
    epsilon: float | None,
    delta: float | None,
    max_cqp_solves: int | None,
    per_od: bool,
    workers: int | None,
    output: Path | None,
    output_json: bool,
    no_meta: bool,
    show_nodes: bool,
    reference_potential: float | None,
) -> None:
    """状態ベクトルを固定して配分（UE は分枝限定法、SO は凸2次計画1回）"""
    try:
        network = load_network(network_path)
        demands = load_demands(demands_path)
        check_demand_nodes(network, demands)
        state = load_state(state_path, network)
        config = CostConfig(delta=delta) if delta is not None else CostConfig()
        limits = _limits(workers, max_cqp_solves)
        epsilon = settings.epsilon if epsilon is None else epsilon
        result = assign(
            network,
            demands,
            state,
            AssignmentModel(model),
            epsilon,
            config,
            limits,
            per_od=per_od,
        )
    except (InputFileError, ValueError) as e:
        _input_error(e)

    report = build_assign_report(
        network,
        result,
        ReportConfig(
            model=AssignmentModel(model),
            epsilon=epsilon,
            delta=config.delta,
            per_od=per_od,
            workers=limits.workers,
        ),
        include_meta=not no_meta,
        reference_potential=reference_potential,
    )
    _emit(report, output, output_json, show_nodes)

    if result.status == BnBStatus.INFEASIBLE:
        err_console.print("[red]✗[/red] 配分は実行不能です (infeasible): 需要が状態ベクトルの通過容量を超えています")
        sys.exit(EXIT_INFEASIBLE)
    if result.status == BnBStatus.ITERATION_LIMIT:
        err_console.print("[yellow]⚠[/yellow] 計算上限に達しました (iteration_limit): 結果は ε 大域最適とは限りません")
        sys.exit(EXIT_BUDGET)


# =============================================================================
# evolve コマンド
# =============================================================================


@cli.command("evolve")
@click.option(
    "--network", "-n", "network_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="ネットワークファイル",
)
@click.option(
    "--demands", "-d", "demands_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="OD需要ファイル",
)
@model_option
@epsilon_option
@delta_option
@click.option(
    "--bottleneck-tolerance", type=float, default=None, help="臨界流量到達判定の相対許容値"
)
@budget_option
@click.option("--per-od", is_flag=True, help="ODペアごとに品種を分ける")
@click.option("--workers", type=int, default=None, help="兄弟ノードを並行に解くワーカー数")
@click.option("--output", "-o", type=click.Path(path_type=Path), default=None, help="レポートの出力先（JSON）")
@click.option("--json", "output_json", is_flag=True, help="レポートを JSON で標準出力に出す")
@click.option("--no-meta", is_flag=True, help="レポートに生成時刻などを含めない")
def evolve_cmd(
    network_path: Path,
    demands_path: Path,
    model: str,
    epsilon: float | None,
    delta: float | None,
    bottleneck_tolerance: float | None,
    max_cqp_solves: int | None,
    per_od: bool,
    workers: int | None,
    output: Path | None,
    output_json: bool,
    no_meta: bool,
) -> None:
    """全リンク非渋滞から渋滞域の進展を追跡し、ネットワークを分類"""
    try:
        network = load_network(network_path)
        demands = load_demands(demands_path)
        check_demand_nodes(network, demands)
        config = CostConfig(delta=delta) if delta is not None else CostConfig()
        limits = _limits(workers, max_cqp_solves)
        epsilon = settings.epsilon if epsilon is None else epsilon
        tolerance = (
            settings.bottleneck_tolerance if bottleneck_tolerance is None else bottleneck_tolerance
        )
    except (InputFileError, ValueError) as e:
        _input_error(e)

    report_config = ReportConfig(
        model=AssignmentModel(model),
        epsilon=epsilon,
        delta=config.delta,
        per_od=per_od,
        workers=limits.workers,
        bottleneck_tolerance=tolerance,
    )
    budget_exhausted = False
    try:
        evolution = evolve(
            network,
            demands,
            AssignmentModel(model),
            config,
            epsilon,
            limits,
            bottleneck_tolerance=tolerance,
            per_od=per_od,
        )
    except EvolutionBudgetError as e:
        evolution = e.report
        budget_exhausted = True
    except ValueError as e:
        _input_error(e)

    report = build_evolve_report(network, evolution, report_config, include_meta=not no_meta)
    _emit(report, output, output_json, show_nodes=False)

    if budget_exhausted:
        err_console.print("[yellow]⚠[/yellow] 途中のシナリオが計算上限に達しました (iteration_limit)")
        sys.exit(EXIT_BUDGET)
    if evolution.verdict is not None and evolution.verdict.kind == VerdictKind.DISABLED:
        err_console.print(f"[red]✗[/red] 機能不全のネットワークです: {evolution.verdict}")
        sys.exit(EXIT_INFEASIBLE)


# =============================================================================
# report コマンド
# =============================================================================


@cli.command("report")
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--plots", "-p", "plot_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
    help="図（SVG）の出力先ディレクトリ",
)
@click.option("--show-nodes", is_flag=True, help="凸2次計画ごとの記録も表示")
def report_cmd(report_path: Path, plot_dir: Path | None, show_nodes: bool) -> None:
    """保存したレポートをテーブルと図で出力"""
    try:
        report = load_report(report_path)
    except InputFileError as e:
        _input_error(e)

    render_report(report, console, show_nodes=show_nodes)

    if plot_dir is None:
        return
    try:
        from congestion_assign.report.plots import write_plots
    except ImportError:
        err_console.print("[red]エラー:[/red] 図の出力には matplotlib と networkx が必要です")
        err_console.print("[yellow]ヒント:[/yellow] `pip install congestion-assign[plot]` を実行してください")
        sys.exit(EXIT_INPUT_ERROR)

    written = write_plots(report, plot_dir)
    table = Table(title="出力した図")
    table.add_column("ファイル", style="cyan")
    for path in written:
        table.add_row(str(path))
    console.print(table)


# =============================================================================
# エントリーポイント
# =============================================================================


def run_cli(argv: Sequence[str] | None = None) -> int:
    """CLI を実行して終了コードを返す（引数の誤りは入力エラー扱い）"""
    try:
        result = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name="congest-cli",
            standalone_mode=False,
        )
    except click.exceptions.Abort:
        err_console.print("中断しました")
        return EXIT_INPUT_ERROR
    except click.ClickException as e:
        e.show(file=sys.stderr)
        return EXIT_INPUT_ERROR
    except SystemExit as e:
        if e.code is None:
            return EXIT_OK
        return e.code if isinstance(e.code, int) else EXIT_INPUT_ERROR
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
