"""
リンク係数の整合性検査

係数の符号・大小関係・分岐の連続性（数学的恒等式）をエラーとして、
係数から逆算した基本パラメータの範囲外れを警告として報告する。
"""

import logging
import math
from enum import Enum

from pydantic import BaseModel, Field

from congestion_assign.core.config import settings
from congestion_assign.core.models import Link, ParamRanges

logger = logging.getLogger(__name__)

# 有効桁を丸めた係数を許容するための範囲検査の相対余裕
RANGE_SLACK = 1e-3


class CheckSeverity(str, Enum):
    """検査の重大度"""

    ERROR = "error"
    WARNING = "warning"


class CheckResult(BaseModel):
    """検査1件の結果"""

    name: str
    passed: bool
    severity: CheckSeverity
    residual: float = 0.0
    value: float | None = None
    detail: str = ""


class ConsistencyReport(BaseModel):
    """リンク1本の整合性検査結果"""

    link_id: str
    checks: list[CheckResult] = Field(default_factory=list)
    implied: dict[str, float] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        """エラー級の検査がすべて通ったか"""
        return all(c.passed for c in self.checks if c.severity == CheckSeverity.ERROR)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed and c.severity == CheckSeverity.ERROR]

    @property
    def warnings(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed and c.severity == CheckSeverity.WARNING]

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        if self.ok and not self.warnings:
            return f"リンク {self.link_id}: OK"
        names = [c.name for c in self.failures] + [f"{c.name}(警告)" for c in self.warnings]
        return f"リンク {self.link_id}: {', '.join(names)}"


def _sign_check(name: str, value: float, positive: bool) -> CheckResult:
    passed = value > 0 if positive else value < 0
    return CheckResult(
        name=name,
        passed=passed,
        severity=CheckSeverity.ERROR,
        residual=0.0 if passed else abs(value),
        value=value,
        detail=f"{name} = {value:g}",
    )


def _range_check(name: str, value: float, ranges: ParamRanges) -> CheckResult:
    interval = ranges.interval(name)
    passed = math.isfinite(value) and interval.contains(value, rel_tol=RANGE_SLACK)
    if not math.isfinite(value):
        residual = math.inf
    else:
        residual = max(interval.lo - value, value - interval.hi, 0.0)
    return CheckResult(
        name=f"{name}_range",
        passed=passed,
        severity=CheckSeverity.WARNING,
        residual=residual,
        value=value,
        detail=f"{name} = {value:.6g}（範囲 [{interval.lo:g}, {interval.hi:g}]）",
    )


def implied_basic_params(link: Link) -> dict[str, float]:
    """係数から基本パラメータを逆算する

    d_jam = β/l, d_max = γ q_max/l + d_jam, v_cr = q_max/d_max, w = -l/γ,
    r_mc = q_cr/q_max - 1, 1/v_free = 1/v_cr - α q_cr/l。定義できない値は nan。
    """
    p = link.params
    length = link.length_km
    d_jam = p.beta / length
    d_max = p.gamma * p.q_max / length + d_jam
    v_cr = p.q_max / d_max if d_max > 0 else math.nan
    w = -length / p.gamma if p.gamma != 0 else math.nan
    r_mc = p.q_cr / p.q_max - 1.0
    inv_v_free = 1.0 / v_cr - p.alpha * p.q_cr / length if math.isfinite(v_cr) else math.nan
    v_free = 1.0 / inv_v_free if inv_v_free > 0 else math.nan
    return {
        "d_jam": d_jam,
        "d_max": d_max,
        "v_cr": v_cr,
        "w": w,
        "r_mc": r_mc,
        "v_free": v_free,
    }


def verify_consistency(
    link: Link,
    ranges: ParamRanges | None = None,
    tolerance: float | None = None,
) -> ConsistencyReport:
    """リンク係数の整合性を検査する"""
    ranges = ranges or ParamRanges()
    tolerance = settings.continuity_tolerance if tolerance is None else tolerance
    p = link.params
    report = ConsistencyReport(link_id=link.id)

    report.checks.append(_sign_check("alpha", p.alpha, positive=True))
    report.checks.append(_sign_check("beta", p.beta, positive=True))
    report.checks.append(_sign_check("gamma", p.gamma, positive=False))
    report.checks.append(_sign_check("t_free", p.t_free, positive=True))

    drop = p.q_cr - p.q_max
    report.checks.append(
        CheckResult(
            name="capacity_drop",
            passed=0 < p.q_max < p.q_cr,
            severity=CheckSeverity.ERROR,
            residual=max(-drop, 0.0),
            value=drop,
            detail=f"q_cr - q_max = {drop:g}",
        )
    )

    t_uncongested = p.t_free + p.alpha * p.q_cr
    continuity = abs(t_uncongested - p.t_cr)
    report.checks.append(
        CheckResult(
            name="continuity",
            passed=continuity <= tolerance,
            severity=CheckSeverity.ERROR,
            residual=continuity,
            value=p.t_cr,
            detail=f"t_free + α q_cr = {t_uncongested:.6f}, γ + β/q_max = {p.t_cr:.6f}",
        )
    )

    implied = implied_basic_params(link)
    report.implied = implied

    if p.d_max is not None:
        gap = abs(p.d_max - implied["d_max"])
        report.checks.append(
            CheckResult(
                name="d_max",
                passed=gap <= 1e-6 * max(1.0, abs(p.d_max)),
                severity=CheckSeverity.ERROR,
                residual=gap,
                value=p.d_max,
                detail=f"d_max = {p.d_max:g}, 係数からの逆算値 = {implied['d_max']:g}",
            )
        )

    for name in ("d_jam", "v_cr", "w", "r_mc", "v_free"):
        report.checks.append(_range_check(name, implied[name], ranges))

    for c in report.failures:
        logger.debug(f"リンク {link.id}: 整合性エラー {c.detail}")
    for c in report.warnings:
        logger.debug(f"リンク {link.id}: 範囲外 {c.detail}")

    return report
