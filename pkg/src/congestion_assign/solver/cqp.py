"""
凸2次計画ソルバー

分離可能な凸2次目的関数 Σ q_i x_i² + c_i x_i + const を、等式制約 A x = b と
変数ごとの上下限のもとで最小化する。

1. 実行可能性判定: HiGHS の線形計画（目的関数0）で実行不能を確定させる
2. 主双対内点法: Mehrotra の予測子・修正子法（正規方程式を Cholesky 分解で解く）
3. 仕上げ: 内点法が活性と判定した上下限に変数を固定して解き直し、KKT条件を満たせば採用する
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import linprog

from congestion_assign.core.config import settings

if TYPE_CHECKING:
    from congestion_assign.core.models import FlowPattern
    from congestion_assign.solver.formulation import FlowLayout

logger = logging.getLogger(__name__)

# 境界への最大ステップに掛ける係数
STEP_FRACTION = 0.995
# 内点法の正則化
PRIMAL_REGULARIZATION = 1e-11
DUAL_REGULARIZATION = 1e-12
# これより小さい負の方向成分はステップ長の計算で無視する
TINY_DIRECTION = 1e-300


class QPStructureError(ValueError):
    """問題の構造エラー（次元不一致・非凸・上下限の逆転）"""


class QPStatus(str, Enum):
    """求解結果の状態"""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


# =============================================================================
# 問題・結果
# =============================================================================


@dataclass(eq=False)
class QPProblem:
    """凸2次計画問題 min Σ quad_i x_i² + linear_i x_i + constant, s.t. a_eq x = b_eq, lower <= x <= upper"""

    quad: np.ndarray
    linear: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constant: float = 0.0
    layout: FlowLayout | None = None

    def __post_init__(self) -> None:
        self.quad = np.asarray(self.quad, dtype=float).ravel()
        n = self.quad.size
        self.linear = np.asarray(self.linear, dtype=float).ravel()
        self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        if self.a_eq is None:
            self.a_eq = sp.csr_matrix((0, n))
        self.a_eq = sp.csr_matrix(self.a_eq, dtype=float)

        if self.linear.size != n or self.lower.size != n or self.upper.size != n:
            raise QPStructureError(
                f"変数の次元が一致しません: quad={n}, linear={self.linear.size}, "
                f"lower={self.lower.size}, upper={self.upper.size}"
            )
        if self.a_eq.shape != (self.b_eq.size, n):
            raise QPStructureError(
                f"等式制約の次元が一致しません: A={self.a_eq.shape}, b={self.b_eq.size}, n={n}"
            )
        if np.isnan(self.quad).any() or np.isnan(self.linear).any() or np.isnan(self.b_eq).any():
            raise QPStructureError("係数に NaN が含まれています")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any():
            raise QPStructureError("上下限に NaN が含まれています")
        if (self.quad < 0).any():
            i = int(np.argmin(self.quad))
            raise QPStructureError(f"2次係数が負です（非凸）: 変数 {i}, {self.quad[i]:g}")
        if (self.lower > self.upper).any():
            i = int(np.argmax(self.lower - self.upper))
            raise QPStructureError(
                f"下限が上限を超えています: 変数 {i}, [{self.lower[i]:g}, {self.upper[i]:g}]"
            )
        if np.isposinf(self.lower).any() or np.isneginf(self.upper).any():
            raise QPStructureError("下限 +inf または上限 -inf は指定できません")

    @property
    def n_vars(self) -> int:
        return int(self.quad.size)

    @property
    def n_rows(self) -> int:
        return int(self.b_eq.size)

    def objective(self, x: np.ndarray) -> float:
        return float(np.dot(self.quad * x, x) + np.dot(self.linear, x) + self.constant)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        grad: np.ndarray = 2.0 * self.quad * x + self.linear
        return grad

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> QPProblem:
        return replace(self, lower=lower, upper=upper)


class QPTolerances(BaseModel):
    """収束判定"""

    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(default_factory=lambda: settings.cqp_tolerance, gt=0)
    max_iterations: int = Field(default_factory=lambda: settings.cqp_max_iterations, ge=1)
    polish: bool = True


@dataclass(frozen=True)
class KKTResidual:
    """KKT条件の残差（絶対値と相対化のスケール）"""

    primal: float
    stationarity: float
    complementarity: float
    bound_violation: float = 0.0
    dual_infeasibility: float = 0.0
    primal_scale: float = 1.0
    dual_scale: float = 1.0
    objective_scale: float = 1.0

    @property
    def relative_primal(self) -> float:
        return max(self.primal, self.bound_violation) / self.primal_scale

    @property
    def relative_dual(self) -> float:
        return max(self.stationarity, self.dual_infeasibility) / self.dual_scale

    @property
    def relative_complementarity(self) -> float:
        return self.complementarity / self.objective_scale

    def max_absolute(self) -> float:
        return max(
            self.primal,
            self.stationarity,
            self.complementarity,
            self.bound_violation,
            self.dual_infeasibility,
        )

    def max_relative(self) -> float:
        return max(self.relative_primal, self.relative_dual, self.relative_complementarity)

    def within(self, tolerance: float) -> bool:
        return self.max_relative() <= tolerance


@dataclass
class QPSolution:
    """求解結果"""

    status: QPStatus
    x: np.ndarray
    objective: float
    kkt: KKTResidual | None = None
    iterations: int = 0
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    z_lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    z_upper: np.ndarray = field(default_factory=lambda: np.zeros(0))
    polished: bool = False
    message: str = ""
    flows: FlowPattern | None = None

    @property
    def optimal(self) -> bool:
        return self.status == QPStatus.OPTIMAL


# =============================================================================
# KKT残差
# =============================================================================


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _fit_duals(
    problem: QPProblem, x: np.ndarray, grad: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """双対変数を最小二乗で当てはめる（活性な上下限にのみ乗数を置き、符号を射影）"""
    n, m = problem.n_vars, problem.n_rows
    has_l = np.isfinite(problem.lower)
    has_u = np.isfinite(problem.upper)
    act_l = has_l & (x - problem.lower <= 1e-7 * (1.0 + np.abs(np.where(has_l, problem.lower, 0.0))))
    act_u = (
        has_u
        & ~act_l
        & (problem.upper - x <= 1e-7 * (1.0 + np.abs(np.where(has_u, problem.upper, 0.0))))
    )
    idx_l = np.flatnonzero(act_l)
    idx_u = np.flatnonzero(act_u)

    at = problem.a_eq.T.toarray()
    e_l = np.zeros((n, idx_l.size))
    e_l[idx_l, np.arange(idx_l.size)] = 1.0
    e_u = np.zeros((n, idx_u.size))
    e_u[idx_u, np.arange(idx_u.size)] = -1.0
    basis = np.hstack([at, e_l, e_u])

    y = np.zeros(m)
    z_l = np.zeros(n)
    z_u = np.zeros(n)
    if basis.shape[1] == 0:
        return y, z_l, z_u

    sol = scipy.linalg.lstsq(basis, grad)[0]
    z_l[idx_l] = np.maximum(sol[m : m + idx_l.size], 0.0)
    z_u[idx_u] = np.maximum(sol[m + idx_l.size :], 0.0)
    if m:
        y = scipy.linalg.lstsq(at, grad - z_l + z_u)[0]
    return y, z_l, z_u


def kkt_residual(
    problem: QPProblem,
    x: np.ndarray,
    y: np.ndarray | None = None,
    z_lower: np.ndarray | None = None,
    z_upper: np.ndarray | None = None,
) -> KKTResidual:
    """候補解の KKT 残差

    双対変数を省略すると最小二乗で当てはめた双対変数で評価する。
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != problem.n_vars:
        raise QPStructureError(f"候補解の次元 {x.size} が変数の数 {problem.n_vars} と一致しません")

    grad = problem.gradient(x)
    if y is None or z_lower is None or z_upper is None:
        y, z_lower, z_upper = _fit_duals(problem, x, grad)

    has_l = np.isfinite(problem.lower)
    has_u = np.isfinite(problem.upper)
    s_l = np.where(has_l, x - problem.lower, 0.0)
    s_u = np.where(has_u, problem.upper - x, 0.0)
    z_l = np.where(has_l, z_lower, 0.0)
    z_u = np.where(has_u, z_upper, 0.0)

    rp = problem.a_eq @ x - problem.b_eq
    rd = grad - problem.a_eq.T @ y - z_l + z_u
    violation = max(0.0, float(-s_l.min(initial=0.0)), float(-s_u.min(initial=0.0)))
    dual_inf = max(0.0, float(-z_l.min(initial=0.0)), float(-z_u.min(initial=0.0)))
    comp = float(np.sum(np.abs(s_l * z_l)) + np.sum(np.abs(s_u * z_u)))

    return KKTResidual(
        primal=_inf_norm(rp),
        stationarity=_inf_norm(rd),
        complementarity=comp,
        bound_violation=violation,
        dual_infeasibility=dual_inf,
        primal_scale=1.0 + _inf_norm(problem.b_eq),
        dual_scale=1.0 + _inf_norm(problem.linear),
        objective_scale=1.0 + abs(problem.objective(x)),
    )


# =============================================================================
# 実行可能性判定
# =============================================================================


def _check_feasible(problem: QPProblem) -> tuple[bool, str]:
    """目的関数0の線形計画で実行可能性を判定する"""
    if problem.n_rows == 0:
        return True, "等式制約なし"
    bounds = [
        (None if math.isinf(lo) else float(lo), None if math.isinf(hi) else float(hi))
        for lo, hi in zip(problem.lower, problem.upper)
    ]
    result = linprog(
        np.zeros(problem.n_vars),
        A_eq=problem.a_eq,
        b_eq=problem.b_eq,
        bounds=bounds,
        method="highs",
    )
    if result.status == 2:
        return False, str(result.message)
    if result.status != 0:
        logger.warning(f"実行可能性判定が確定しませんでした（status={result.status}）: {result.message}")
    return True, str(result.message)


# =============================================================================
# 内点法
# =============================================================================


class _NormalEquations:
    """正規方程式 A H⁻¹ Aᵀ dy = rhs の分解（対角スケーリング付き）"""

    def __init__(self, a: sp.csr_matrix, h: np.ndarray):
        self.matrix = (a @ sp.diags(1.0 / h) @ a.T).toarray()
        d = np.sqrt(np.abs(np.diag(self.matrix)))
        d[d <= 1e-300] = 1.0
        self.scale = d
        scaled = self.matrix / np.outer(d, d)
        scaled[np.diag_indices_from(scaled)] += DUAL_REGULARIZATION
        self.cho: tuple[np.ndarray, bool] | None
        try:
            self.cho = scipy.linalg.cho_factor(scaled)
            self.scaled = None
        except np.linalg.LinAlgError:
            self.cho = None
            self.scaled = scaled

    def _solve_once(self, rhs: np.ndarray) -> np.ndarray:
        if self.cho is not None:
            sol: np.ndarray = scipy.linalg.cho_solve(self.cho, rhs / self.scale)
        else:
            sol = scipy.linalg.lstsq(self.scaled, rhs / self.scale)[0]
        return sol / self.scale

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        dy = self._solve_once(rhs)
        # 反復改良1回
        dy += self._solve_once(rhs - self.matrix @ dy)
        return dy


@dataclass
class _Iterate:
    x: np.ndarray
    y: np.ndarray
    z_l: np.ndarray
    z_u: np.ndarray
    iterations: int
    converged: bool


def _max_step(v: np.ndarray, dv: np.ndarray, mask: np.ndarray) -> float:
    neg = mask & (dv < -TINY_DIRECTION)
    if not neg.any():
        return math.inf
    return float(np.min(-v[neg] / dv[neg]))


def _all_finite(*arrays: np.ndarray) -> bool:
    return all(bool(np.all(np.isfinite(v))) for v in arrays)


def _interior_point(
    quad2: np.ndarray,
    c: np.ndarray,
    a: sp.csr_matrix,
    b: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    offset: float,
    tolerance: float,
    max_iterations: int,
    primal_scale: float,
    dual_scale: float,
) -> _Iterate:
    """上下限付き凸2次計画の主双対内点法（quad2 はヘッセ行列の対角）"""
    n, m = c.size, b.size
    has_l = np.isfinite(lower)
    has_u = np.isfinite(upper)
    n_comp = int(has_l.sum() + has_u.sum())

    spread = max(1.0, 0.1 * _inf_norm(b))
    x = np.zeros(n)
    both = has_l & has_u
    x[both] = 0.5 * (lower[both] + upper[both])
    only_l = has_l & ~has_u
    x[only_l] = lower[only_l] + spread
    only_u = has_u & ~has_l
    x[only_u] = upper[only_u] - spread
    y = np.zeros(m)
    z_l = np.where(has_l, 1.0, 0.0)
    z_u = np.where(has_u, 1.0, 0.0)

    def newton(
        h: np.ndarray,
        normal: _NormalEquations | None,
        rd: np.ndarray,
        rp: np.ndarray,
        rc_l: np.ndarray,
        rc_u: np.ndarray,
        s_l: np.ndarray,
        s_u: np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        r = -rd - np.where(has_l, rc_l / s_l, 0.0) + np.where(has_u, rc_u / s_u, 0.0)
        if normal is None:
            dy = np.zeros(0)
            dx = r / h
        else:
            dy = normal.solve(-rp - a @ (r / h))
            dx = (r + a.T @ dy) / h
        dz_l = np.where(has_l, (-rc_l - z_l * dx) / s_l, 0.0)
        dz_u = np.where(has_u, (-rc_u + z_u * dx) / s_u, 0.0)
        return dx, dy, dz_l, dz_u

    def mehrotra_step(
        s_l: np.ndarray, s_u: np.ndarray, rd: np.ndarray, rp: np.ndarray, mu: float
    ) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        h = (
            quad2
            + np.where(has_l, z_l / s_l, 0.0)
            + np.where(has_u, z_u / s_u, 0.0)
            + PRIMAL_REGULARIZATION
        )
        if not _all_finite(h):
            raise ValueError("ヘッセ行列の対角に有限でない値があります")
        normal = _NormalEquations(a, h) if m else None

        # 予測子（アフィン方向）
        rc_l = np.where(has_l, s_l * z_l, 0.0)
        rc_u = np.where(has_u, s_u * z_u, 0.0)
        dx, dy, dz_l, dz_u = newton(h, normal, rd, rp, rc_l, rc_u, s_l, s_u)
        alpha_aff = min(
            1.0,
            _max_step(s_l, dx, has_l),
            _max_step(s_u, -dx, has_u),
            _max_step(z_l, dz_l, has_l),
            _max_step(z_u, dz_u, has_u),
        )

        # 修正子
        if n_comp:
            mu_aff = (
                float(
                    np.sum(np.where(has_l, (s_l + alpha_aff * dx) * (z_l + alpha_aff * dz_l), 0.0))
                    + np.sum(np.where(has_u, (s_u - alpha_aff * dx) * (z_u + alpha_aff * dz_u), 0.0))
                )
                / n_comp
            )
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            rc_l = np.where(has_l, s_l * z_l + dx * dz_l - sigma * mu, 0.0)
            rc_u = np.where(has_u, s_u * z_u - dx * dz_u - sigma * mu, 0.0)
            dx, dy, dz_l, dz_u = newton(h, normal, rd, rp, rc_l, rc_u, s_l, s_u)

        alpha = min(
            1.0,
            STEP_FRACTION
            * min(
                _max_step(s_l, dx, has_l),
                _max_step(s_u, -dx, has_u),
                _max_step(z_l, dz_l, has_l),
                _max_step(z_u, dz_u, has_u),
            ),
        )
        return alpha, dx, dy, dz_l, dz_u

    for it in range(max_iterations + 1):
        s_l = np.where(has_l, x - lower, 1.0)
        s_u = np.where(has_u, upper - x, 1.0)
        rd = quad2 * x + c - a.T @ y - z_l + z_u
        rp = a @ x - b
        gap = float(np.sum(np.where(has_l, s_l * z_l, 0.0)) + np.sum(np.where(has_u, s_u * z_u, 0.0)))
        objective = float(0.5 * np.dot(quad2 * x, x) + np.dot(c, x) + offset)

        rel_p = _inf_norm(rp) / primal_scale
        rel_d = _inf_norm(rd) / dual_scale
        rel_c = gap / (1.0 + abs(objective))
        logger.debug(f"内点法 {it}: primal={rel_p:.2e} dual={rel_d:.2e} comp={rel_c:.2e}")
        if rel_p <= tolerance and rel_d <= tolerance and rel_c <= tolerance:
            return _Iterate(x, y, z_l, z_u, it, True)
        if it == max_iterations:
            break

        mu = gap / n_comp if n_comp else 0.0
        try:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                alpha, dx, dy, dz_l, dz_u = mehrotra_step(s_l, s_u, rd, rp, mu)
        except (ValueError, np.linalg.LinAlgError) as e:
            logger.debug(f"内点法 {it}: 正規方程式を解けません: {e}")
            return _Iterate(x, y, z_l, z_u, it, False)

        with np.errstate(over="ignore", invalid="ignore"):
            x_next = x + alpha * dx
            y_next = y + alpha * dy if m else y
            z_l_next = z_l + alpha * dz_l
            z_u_next = z_u + alpha * dz_u
        if not (math.isfinite(alpha) and _all_finite(x_next, y_next, z_l_next, z_u_next)):
            # 有限な最後の反復点を未収束として返す
            logger.debug(f"内点法 {it}: 探索方向が有限でないため打ち切ります")
            return _Iterate(x, y, z_l, z_u, it, False)
        x, y, z_l, z_u = x_next, y_next, z_l_next, z_u_next

    return _Iterate(x, y, z_l, z_u, max_iterations, False)


def _solve_with_fixed(
    problem: QPProblem,
    lower: np.ndarray,
    upper: np.ndarray,
    tolerance: float,
    max_iterations: int,
) -> _Iterate:
    """上下限が一致する変数を消去して内点法を実行し、全変数の解と双対変数を返す"""
    fixed = lower == upper
    free = ~fixed
    x_full = np.where(fixed, lower, 0.0)

    a_free = problem.a_eq[:, np.flatnonzero(free)]
    b_red = problem.b_eq - problem.a_eq[:, np.flatnonzero(fixed)] @ x_full[fixed]
    quad = problem.quad[free]
    lin = problem.linear[free]
    offset = float(
        np.dot(problem.quad[fixed] * x_full[fixed], x_full[fixed])
        + np.dot(problem.linear[fixed], x_full[fixed])
        + problem.constant
    )

    primal_scale = 1.0 + _inf_norm(problem.b_eq)
    dual_scale = 1.0 + _inf_norm(problem.linear)

    if free.any():
        inner = _interior_point(
            2.0 * quad,
            lin,
            sp.csr_matrix(a_free),
            b_red,
            lower[free],
            upper[free],
            offset,
            tolerance,
            max_iterations,
            primal_scale,
            dual_scale,
        )
        x_full[free] = inner.x
        y = inner.y
        iterations, converged = inner.iterations, inner.converged
    else:
        y = np.zeros(problem.n_rows)
        if problem.n_rows:
            at = problem.a_eq.T.toarray()
            y = scipy.linalg.lstsq(at, problem.gradient(x_full))[0]
        iterations = 0
        converged = _inf_norm(problem.a_eq @ x_full - problem.b_eq) / primal_scale <= tolerance

    z_l = np.zeros(problem.n_vars)
    z_u = np.zeros(problem.n_vars)
    if free.any():
        z_l[free] = inner.z_l
        z_u[free] = inner.z_u
    if fixed.any():
        r = problem.gradient(x_full) - problem.a_eq.T @ y
        z_l[fixed] = np.maximum(r[fixed], 0.0)
        z_u[fixed] = np.maximum(-r[fixed], 0.0)
    return _Iterate(x_full, y, z_l, z_u, iterations, converged)


def _polish(
    problem: QPProblem, base: _Iterate, base_objective: float, tolerances: QPTolerances
) -> _Iterate | None:
    """活性な上下限に変数を固定して解き直す"""
    has_l = np.isfinite(problem.lower)
    has_u = np.isfinite(problem.upper)
    free = problem.lower != problem.upper
    s_l = np.where(has_l, base.x - problem.lower, math.inf)
    s_u = np.where(has_u, problem.upper - base.x, math.inf)
    act_l = free & has_l & (base.z_l > s_l)
    act_u = free & has_u & (base.z_u > s_u) & ~act_l
    if not (act_l.any() or act_u.any()):
        return None

    lower = problem.lower.copy()
    upper = problem.upper.copy()
    upper[act_l] = problem.lower[act_l]
    lower[act_u] = problem.upper[act_u]
    candidate = _solve_with_fixed(
        problem, lower, upper, tolerances.tolerance, max(10, tolerances.max_iterations // 2)
    )
    if not candidate.converged:
        return None

    kkt = kkt_residual(problem, candidate.x, candidate.y, candidate.z_l, candidate.z_u)
    obj = problem.objective(candidate.x)
    if not kkt.within(tolerances.tolerance):
        logger.debug(f"仕上げを棄却: KKT残差 {kkt.max_relative():.2e}")
        return None
    if obj > base_objective + tolerances.tolerance * (1.0 + abs(base_objective)):
        logger.debug(f"仕上げを棄却: 目的関数 {obj:.10g} > {base_objective:.10g}")
        return None
    candidate.iterations += base.iterations
    return candidate


def solve_cqp(problem: QPProblem, tolerances: QPTolerances | None = None) -> QPSolution:
    """凸2次計画を解く

    実行不能は例外ではなく状態 INFEASIBLE で返す。同じ入力と許容誤差に対して結果は決定的。
    """
    tolerances = tolerances or QPTolerances()

    feasible, message = _check_feasible(problem)
    if not feasible:
        logger.debug(f"実行不能: {message}")
        return QPSolution(
            status=QPStatus.INFEASIBLE,
            x=np.full(problem.n_vars, np.nan),
            objective=math.nan,
            message=message,
        )

    result = _solve_with_fixed(
        problem, problem.lower, problem.upper, tolerances.tolerance, tolerances.max_iterations
    )
    polished = False
    if result.converged and tolerances.polish:
        refined = _polish(problem, result, problem.objective(result.x), tolerances)
        if refined is not None:
            result = refined
            polished = True

    kkt = kkt_residual(problem, result.x, result.y, result.z_l, result.z_u)
    optimal = result.converged and kkt.within(tolerances.tolerance)
    status = QPStatus.OPTIMAL if optimal else QPStatus.ITERATION_LIMIT
    if not optimal:
        logger.warning(
            f"内点法が収束しませんでした（{result.iterations}反復, KKT残差 {kkt.max_relative():.2e}）"
        )

    solution = QPSolution(
        status=status,
        x=result.x,
        objective=problem.objective(result.x),
        kkt=kkt,
        iterations=result.iterations,
        y=result.y,
        z_lower=result.z_l,
        z_upper=result.z_u,
        polished=polished,
        message=message,
    )
    if problem.layout is not None:
        solution.flows = problem.layout.to_flow_pattern(result.x)
    return solution
