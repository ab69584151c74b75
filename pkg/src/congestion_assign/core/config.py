"""
設定管理モジュール

環境変数（接頭辞 CONGEST_）と .env ファイルからソルバ設定を読み込む。
"""

from pathlib import Path
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """アプリケーション設定"""

    model_config = SettingsConfigDict(
        env_prefix="CONGEST_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # ログ
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="INFO",
        description="ログレベル",
    )

    # 分枝限定法
    epsilon: float = Field(
        default=0.001,
        gt=0,
        description="分枝限定法の収束判定値 ε",
    )
    max_cqp_solves: int = Field(
        default=10_000,
        gt=0,
        description="1回の分枝限定法で解く凸2次計画の上限数",
    )
    min_box_width_ratio: float = Field(
        default=1e-6,
        gt=0,
        description="ボックス最小幅（q_max - Δ に対する比）",
    )
    bnb_workers: int = Field(
        default=1,
        ge=1,
        description="兄弟ノードを並行に解くワーカー数",
    )

    # 旅行時間関数
    delta: float = Field(
        default=60.0,
        gt=0,
        description="渋滞リンク流量の下限 Δ（台/時）",
    )

    # 凸2次計画ソルバ
    cqp_tolerance: float = Field(
        default=1e-8,
        gt=0,
        description="KKT残差の相対許容値",
    )
    cqp_max_iterations: int = Field(
        default=200,
        gt=0,
        description="内点法の最大反復回数",
    )

    # 渋滞進展
    bottleneck_tolerance: float = Field(
        default=1e-6,
        ge=0,
        description="臨界流量到達判定の相対許容値",
    )

    # パラメータ整合性
    continuity_tolerance: float = Field(
        default=1e-3,
        gt=0,
        description="2分岐の連続性検査の許容値（時間）",
    )

    # 乱数
    default_seed: int = Field(
        default=0,
        ge=0,
        description="パラメータ生成の既定シード",
    )

    output_dir: Path = Field(
        default=Path("output"),
        description="レポート・図の出力先",
    )

    @property
    def config_dir(self) -> Path:
        """設定ディレクトリのパス"""
        return Path("config")


# グローバル設定インスタンス
settings = Settings()
