"""
CLI モジュール
"""

from congestion_assign.cli.main import cli, main, run_cli

__all__ = ["cli", "main", "run_cli"]
