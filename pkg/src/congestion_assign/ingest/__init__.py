"""
入力ファイルモジュール

ネットワーク・OD需要・リンク状態・パラメータ範囲・トポロジーの各ファイルを読み書きする。
"""

from congestion_assign.ingest.loaders import (
    InputFileError,
    LinkSpec,
    NetworkFile,
    TopologyFile,
    check_network,
    fixture_path,
    load_demands,
    load_network,
    load_ranges,
    load_state,
    load_topology,
    write_demands,
    write_network,
    write_state,
)

__all__ = [
    "InputFileError",
    "LinkSpec",
    "NetworkFile",
    "TopologyFile",
    "check_network",
    "fixture_path",
    "load_demands",
    "load_network",
    "load_ranges",
    "load_state",
    "load_topology",
    "write_demands",
    "write_network",
    "write_state",
]
