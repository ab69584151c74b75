"""
レポートモジュール

配分・進展解析の結果を RunReport にまとめ、JSON・テーブル・図として出力する。
図の出力（plots）は plot エクストラが必要なため、ここでは読み込まない。
"""

from congestion_assign.report.builder import (
    REPORT_SCHEMA_VERSION,
    BoundReport,
    HistoryRow,
    LevelReport,
    LinkReport,
    NodeRow,
    ReferenceCheck,
    ReferenceVerdict,
    ReportConfig,
    RunReport,
    bound_report,
    build_assign_report,
    build_evolve_report,
    compare_with_reference,
    dump_report,
    finite_or_none,
    load_report,
    write_report,
)
from congestion_assign.report.render import (
    bound_table,
    config_table,
    consistency_table,
    level_table,
    link_table,
    render_report,
)

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "BoundReport",
    "HistoryRow",
    "LevelReport",
    "LinkReport",
    "NodeRow",
    "ReferenceCheck",
    "ReferenceVerdict",
    "ReportConfig",
    "RunReport",
    "bound_report",
    "build_assign_report",
    "build_evolve_report",
    "compare_with_reference",
    "dump_report",
    "finite_or_none",
    "load_report",
    "write_report",
    "bound_table",
    "config_table",
    "consistency_table",
    "level_table",
    "link_table",
    "render_report",
]
