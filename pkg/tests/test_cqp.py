"""
凸2次計画ソルバーのテスト
"""

import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from congestion_assign.solver import (
    QPProblem,
    QPStatus,
    QPStructureError,
    QPTolerances,
    kkt_residual,
    solve_cqp,
)
from congestion_assign.solver.cqp import _interior_point


def problem(quad, linear, a=None, b=(), lower=None, upper=None):
    n = len(quad)
    return QPProblem(
        quad=np.asarray(quad, dtype=float),
        linear=np.asarray(linear, dtype=float),
        a_eq=None if a is None else sp.csr_matrix(np.asarray(a, dtype=float)),
        b_eq=np.asarray(b, dtype=float),
        lower=np.full(n, -math.inf) if lower is None else np.asarray(lower, dtype=float),
        upper=np.full(n, math.inf) if upper is None else np.asarray(upper, dtype=float),
    )


EQUALITY = problem([1.0, 2.0], [0.0, 0.0], a=[[1.0, 1.0]], b=[1.0])


class TestSolveCQP:
    def test_active_lower_bound(self):
        sol = solve_cqp(problem([1.0], [0.0], lower=[1.0]))
        assert sol.status == QPStatus.OPTIMAL
        assert sol.x[0] == pytest.approx(1.0, abs=1e-7)
        assert sol.objective == pytest.approx(1.0, abs=1e-7)
        assert sol.z_lower[0] == pytest.approx(2.0, rel=1e-5)

    def test_equality_constrained(self):
        sol = solve_cqp(EQUALITY)
        assert sol.optimal
        np.testing.assert_allclose(sol.x, [2 / 3, 1 / 3], atol=1e-7)
        assert sol.objective == pytest.approx(2 / 3, abs=1e-7)
        assert sol.y[0] == pytest.approx(4 / 3, rel=1e-5)

    def test_interior_unconstrained(self):
        # (x - 3)² = x² - 6x + 9
        sol = solve_cqp(
            QPProblem(
                quad=np.array([1.0]),
                linear=np.array([-6.0]),
                a_eq=None,
                b_eq=np.zeros(0),
                lower=np.array([0.0]),
                upper=np.array([10.0]),
                constant=9.0,
            )
        )
        assert sol.x[0] == pytest.approx(3.0, abs=1e-6)
        assert sol.objective == pytest.approx(0.0, abs=1e-8)

    def test_linear_program(self):
        # q = 0 の変数は線形計画になる
        sol = solve_cqp(
            problem([0.0, 0.0], [1.0, 2.0], a=[[1.0, 1.0]], b=[5.0], lower=[0, 0], upper=[3, 10])
        )
        assert sol.optimal
        np.testing.assert_allclose(sol.x, [3.0, 2.0], atol=1e-6)

    def test_fixed_variables(self):
        sol = solve_cqp(
            problem([1.0, 1.0], [0.0, 0.0], a=[[1.0, 1.0]], b=[4.0], lower=[1, 0], upper=[1, 10])
        )
        np.testing.assert_allclose(sol.x, [1.0, 3.0], atol=1e-6)

    def test_infeasible(self):
        sol = solve_cqp(
            problem([1.0, 1.0], [0.0, 0.0], a=[[1.0, 1.0]], b=[5.0], lower=[0, 0], upper=[1, 1])
        )
        assert sol.status == QPStatus.INFEASIBLE
        assert np.isnan(sol.x).all()
        assert math.isnan(sol.objective)
        assert sol.kkt is None

    def test_deterministic(self):
        first = solve_cqp(EQUALITY)
        second = solve_cqp(EQUALITY)
        np.testing.assert_array_equal(first.x, second.x)
        assert first.iterations == second.iterations

    def test_iteration_limit(self):
        sol = solve_cqp(
            problem([1.0, 2.0], [0.0, 0.0], a=[[1.0, 1.0]], b=[1.0], lower=[0, 0], upper=[1, 1]),
            QPTolerances(max_iterations=1, polish=False),
        )
        assert sol.status == QPStatus.ITERATION_LIMIT

    def test_polish_lands_on_bound(self):
        sol = solve_cqp(
            problem([1.0, 1.0], [-10.0, 0.0], a=[[1.0, 1.0]], b=[2.0], lower=[0, 0], upper=[1, 5])
        )
        assert sol.optimal
        assert sol.x[0] == pytest.approx(1.0, abs=1e-9)
        assert sol.x[1] == pytest.approx(1.0, abs=1e-7)


class TestNumericalBreakdown:
    def test_zero_slack_returns_unconverged_iterate(self):
        # 上下限が一致する変数をそのまま渡すと初期点で上限までの余裕が 0 になる
        result = _interior_point(
            quad2=np.array([2.0, 2.0]),
            c=np.zeros(2),
            a=sp.csr_matrix(np.array([[1.0, 1.0]])),
            b=np.array([1.5]),
            lower=np.array([0.0, 1.0]),
            upper=np.array([1.0, 1.0]),
            offset=0.0,
            tolerance=1e-8,
            max_iterations=50,
            primal_scale=2.5,
            dual_scale=1.0,
        )
        assert not result.converged
        assert np.isfinite(result.x).all()
        assert np.isfinite(result.y).all()

    def test_one_ulp_box_does_not_raise(self):
        top = np.nextafter(1e8, np.inf)
        p = problem(
            [1.0, 1e-6],
            [0.0, 0.0],
            a=[[1.0, 1.0]],
            b=[1e8 + 0.5],
            lower=[0.0, 1e8],
            upper=[1.0, top],
        )
        sol = solve_cqp(p)
        assert sol.status in (QPStatus.OPTIMAL, QPStatus.ITERATION_LIMIT)
        assert np.isfinite(sol.x).all()


class TestStructure:
    def test_non_convex(self):
        with pytest.raises(QPStructureError):
            problem([-1.0], [0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(QPStructureError):
            problem([1.0, 1.0], [0.0])

    def test_constraint_shape(self):
        with pytest.raises(QPStructureError):
            problem([1.0, 1.0], [0.0, 0.0], a=[[1.0, 1.0]], b=[1.0, 2.0])

    def test_inverted_bounds(self):
        with pytest.raises(QPStructureError):
            problem([1.0], [0.0], lower=[2.0], upper=[1.0])

    def test_nan_coefficient(self):
        with pytest.raises(QPStructureError):
            problem([math.nan], [0.0])

    def test_is_value_error(self):
        assert issubclass(QPStructureError, ValueError)


class TestKKTResidual:
    def test_optimum_has_small_residual(self):
        kkt = kkt_residual(EQUALITY, np.array([2 / 3, 1 / 3]))
        assert kkt.within(1e-10)

    def test_perturbed_point(self):
        x = np.array([2 / 3 + 0.1, 1 / 3])
        kkt = kkt_residual(EQUALITY, x, np.zeros(1), np.zeros(2), np.zeros(2))
        assert kkt.stationarity == pytest.approx(2 * (2 / 3 + 0.1), rel=1e-12)
        assert kkt.primal == pytest.approx(0.1)

    def test_gradient_gap_with_fitted_duals(self):
        # 等式制約の乗数を当てはめても勾配の差 0.2 の半分が残る
        x = np.array([2 / 3 + 0.1, 1 / 3])
        kkt = kkt_residual(EQUALITY, x)
        assert kkt.stationarity == pytest.approx(0.1, rel=1e-9)

    def test_primal_residual(self):
        kkt = kkt_residual(EQUALITY, np.array([1.0, 0.5]))
        assert kkt.primal == pytest.approx(0.5)
        assert kkt.relative_primal == pytest.approx(0.25)

    def test_bound_violation(self):
        p = problem([1.0], [0.0], lower=[1.0])
        kkt = kkt_residual(p, np.array([0.5]))
        assert kkt.bound_violation == pytest.approx(0.5)

    def test_wrong_dimension(self):
        with pytest.raises(QPStructureError):
            kkt_residual(EQUALITY, np.zeros(3))


@st.composite
def feasible_problems(draw):
    """既知の実行可能点を持つ、行フルランクの等式制約付き問題"""
    m = draw(st.integers(1, 3))
    n = draw(st.integers(m + 1, 8))
    floats = st.floats(-3, 3, allow_nan=False)
    tail = draw(hnp.arrays(float, (m, n - m), elements=floats))
    a = np.hstack([np.eye(m), tail])
    quad = draw(hnp.arrays(float, n, elements=st.floats(0.05, 5)))
    linear = draw(hnp.arrays(float, n, elements=st.floats(-10, 10)))
    lower = draw(hnp.arrays(float, n, elements=st.floats(-5, 0)))
    width = draw(hnp.arrays(float, n, elements=st.floats(0.5, 5)))
    upper = lower + width
    x0 = lower + 0.5 * width
    return (
        QPProblem(
            quad=quad,
            linear=linear,
            a_eq=sp.csr_matrix(a),
            b_eq=a @ x0,
            lower=lower,
            upper=upper,
        ),
        x0,
    )


@pytest.mark.slow
@settings(max_examples=1000)
@given(feasible_problems())
def test_random_problems_satisfy_kkt(case):
    p, x0 = case
    sol = solve_cqp(p)
    assert sol.status == QPStatus.OPTIMAL
    assert sol.kkt is not None and sol.kkt.within(1e-8)
    assert kkt_residual(p, sol.x, sol.y, sol.z_lower, sol.z_upper).within(1e-8)
    assert sol.objective <= p.objective(x0) + 1e-7 * (1 + abs(p.objective(x0)))
