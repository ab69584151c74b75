"""
渋滞域進展解析のテスト
"""

import pytest

from congestion_assign.core import AssignmentModel, CostConfig, StateVector
from congestion_assign.evolution import (
    EvolutionBudgetError,
    Verdict,
    VerdictKind,
    detect_bottleneck,
    disperse,
    evolve,
    replay_level,
)
from congestion_assign.ingest import fixture_path, load_demands
from congestion_assign.solver import BnBLimits, BnBStatus
from tests.builders import demands

CONFIG = CostConfig(delta=60.0)


class TestDetectBottleneck:
    def test_at_critical_flow(self, two_link):
        found = detect_bottleneck(two_link, two_link.uncongested_state(), {"a": 1680.0, "b": 10.0})
        assert found == ["a"]

    def test_tolerance_is_relative(self, two_link):
        state = two_link.uncongested_state()
        assert detect_bottleneck(two_link, state, {"a": 1679.0, "b": 0.0}, 1e-3) == ["a"]
        assert detect_bottleneck(two_link, state, {"a": 1679.0, "b": 0.0}, 1e-6) == []

    def test_congested_links_ignored(self, two_link):
        state = StateVector(states={"a": 0, "b": 1})
        assert detect_bottleneck(two_link, state, {"a": 1680.0, "b": 1680.0}) == ["b"]


class TestVerdict:
    def test_str(self):
        assert str(Verdict(kind=VerdictKind.TOTALLY_UNCONGESTED)) == "totally_uncongested"
        assert str(Verdict(kind=VerdictKind.FINAL_CONGESTION, level=3)) == "final_congestion(3)"
        assert str(Verdict(kind=VerdictKind.DISABLED, level=1)) == "disabled(1)"


class TestEvolve:
    def test_demand_above_critical_flow(self, one_link):
        report = evolve(one_link, load_demands(fixture_path("one_link_1700.demands.yml")))
        assert str(report.verdict) == "disabled(1)"
        assert len(report.levels) == 1
        assert report.levels[0].status == BnBStatus.INFEASIBLE
        assert report.levels[0].flows is None

    def test_demand_at_critical_flow(self, one_link):
        report = evolve(one_link, load_demands(fixture_path("one_link_1680.demands.yml")))
        assert report.verdict == Verdict(kind=VerdictKind.DISABLED, level=2)
        assert report.bottleneck_sequence == [["1-2"]]
        assert report.levels[1].state.congested_links() == ["1-2"]
        assert report.final_zone == ["1-2"]

    def test_light_demand(self, one_link):
        report = evolve(one_link, demands(("1", "2", 1000)), config=CONFIG)
        assert report.verdict.kind == VerdictKind.TOTALLY_UNCONGESTED
        assert report.verdict.level == 0
        assert report.levels[0].objective is not None
        assert report.levels[0].potential == pytest.approx(report.levels[0].objective)

    def test_zero_demand(self, diamond):
        report = evolve(diamond, demands(), config=CONFIG)
        assert str(report.verdict) == "totally_uncongested"
        assert report.final_zone == []

    def test_system_optimum_model(self, one_link):
        report = evolve(
            one_link,
            demands(("1", "2", 1680)),
            model=AssignmentModel.SO,
            config=CONFIG,
        )
        assert report.model == AssignmentModel.SO
        assert str(report.verdict) == "disabled(2)"

    def test_budget_exhausted(self, two_link):
        # 第2段階でリンク a が渋滞し、根の緩和問題だけでは収束しない
        with pytest.raises(EvolutionBudgetError) as exc:
            evolve(
                two_link,
                demands(("1", "2", 3000)),
                config=CONFIG,
                limits=BnBLimits(max_cqp_solves=2),
            )
        partial = exc.value.report
        assert partial.verdict is None
        assert [lv.index for lv in partial.levels] == [1, 2]
        assert partial.levels[0].bottleneck == ["a"]
        assert partial.levels[1].status == BnBStatus.ITERATION_LIMIT
        assert partial.levels[1].zone == ["a"]

    def test_summary(self, one_link):
        report = evolve(one_link, load_demands(fixture_path("one_link_1680.demands.yml")))
        text = report.summary()
        assert "disabled(2)" in text
        assert "シナリオ 2" in text


class TestReplayAndDisperse:
    def test_replay_level_matches(self, one_link):
        table = demands(("1", "2", 1000))
        report = evolve(one_link, table, config=CONFIG)
        result = replay_level(one_link, table, report.levels[0], config=CONFIG)
        assert result.objective == pytest.approx(report.levels[0].objective)

    def test_disperse_reversed_levels(self, one_link):
        report = evolve(one_link, load_demands(fixture_path("one_link_1680.demands.yml")))
        steps = disperse(one_link, report, [demands(("1", "2", 1500))], config=CONFIG)
        assert [s.level_index for s in steps] == [1]
        assert steps[0].status == BnBStatus.OPTIMAL
        assert steps[0].flows.aggregate_flows["1-2"] == pytest.approx(1500.0, abs=1e-4)

    def test_disperse_congested_level(self, two_link):
        report = evolve(two_link, demands(("1", "2", 1000)), config=CONFIG)
        report.levels[0].state = StateVector(states={"a": 0, "b": 1})
        steps = disperse(two_link, report, [demands(("1", "2", 1000))], config=CONFIG)
        assert steps[0].state.congested_links() == ["a"]
        assert steps[0].potential is not None

    def test_disperse_count_mismatch(self, one_link):
        report = evolve(one_link, demands(("1", "2", 1000)), config=CONFIG)
        with pytest.raises(ValueError):
            disperse(one_link, report, [])


@pytest.mark.slow
def test_seven_node_evolution(seven_node_network, seven_node_demands, seven_node_reference):
    computed = seven_node_reference["computed"]
    report = evolve(seven_node_network, seven_node_demands, config=CONFIG)
    assert str(report.verdict) == computed["verdict"]
    expected = [sorted(b) for b in computed["bottlenecks"]]
    assert [sorted(b) for b in report.bottleneck_sequence] == expected

    # 参照データの第3段階は 1-3 を q_cr に置いた解だが、証明済みの最適解はそれより小さい
    last = report.levels[-1]
    assert sorted(last.state.congested_links()) == ["1-2", "3-4", "3-6"]
    assert last.status == BnBStatus.OPTIMAL
    assert last.gap <= 1e-3 * (1 + 1e-9)
    assert last.potential == pytest.approx(computed["scenario3_potential"], abs=0.01)
    assert last.potential < seven_node_reference["scenarios"][2]["potential"]
    assert last.flows.aggregate_flows["1-3"] < seven_node_network.link("1-3").params.q_cr - 100
    assert expected == [sorted(b) for b in seven_node_reference["bottlenecks"][:2]]
