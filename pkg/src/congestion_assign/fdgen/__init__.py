"""
リンク係数生成モジュール

基本図パラメータの乱数生成、係数の導出、整合性検査を提供する。
"""

from congestion_assign.fdgen.consistency import (
    CheckResult,
    CheckSeverity,
    ConsistencyReport,
    implied_basic_params,
    verify_consistency,
)
from congestion_assign.fdgen.generator import (
    RNG_ALGORITHM,
    LinkSkeleton,
    derive_link_params,
    generate_links,
    make_rng,
    sample_basic_params,
)

__all__ = [
    "RNG_ALGORITHM",
    "LinkSkeleton",
    "make_rng",
    "sample_basic_params",
    "derive_link_params",
    "generate_links",
    "CheckResult",
    "CheckSeverity",
    "ConsistencyReport",
    "implied_basic_params",
    "verify_consistency",
]
