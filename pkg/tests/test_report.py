"""
実行レポートのテスト
"""

import json

import pytest
from rich.console import Console

from congestion_assign.core import AssignmentModel, CostConfig, StateVector, build_network
from congestion_assign.evolution import evolve
from congestion_assign.ingest import InputFileError, check_network
from congestion_assign.report import (
    ReferenceVerdict,
    ReportConfig,
    build_assign_report,
    build_evolve_report,
    compare_with_reference,
    consistency_table,
    dump_report,
    finite_or_none,
    load_report,
    render_report,
    write_report,
)
from congestion_assign.solver import assign
from tests.builders import demands

CONFIG = CostConfig(delta=60.0)
UE_CONFIG = ReportConfig(model=AssignmentModel.UE, epsilon=1e-3, delta=60.0)


@pytest.fixture
def two_link_report(two_link):
    state = StateVector(states={"a": 1, "b": 0})
    result = assign(two_link, demands(("1", "2", 1000)), state, epsilon=1e-3, config=CONFIG)
    return build_assign_report(two_link, result, UE_CONFIG)


def render_text(report, show_nodes=False):
    console = Console(record=True, width=200)
    render_report(report, console, show_nodes=show_nodes)
    return console.export_text()


def test_finite_or_none():
    assert finite_or_none(float("nan")) is None
    assert finite_or_none(float("inf")) is None
    assert finite_or_none(None) is None
    assert finite_or_none(2) == 2.0


class TestAssignReport:
    def test_fields(self, two_link_report):
        report = two_link_report
        assert report.kind == "assign"
        assert report.status == "optimal"
        assert report.feasible
        assert report.link("b").state == 0
        assert report.link("a").flow == pytest.approx(940.0, abs=0.1)
        assert report.link("b").utilization == pytest.approx(60.0 / 1600.0, abs=1e-4)
        assert report.bnb.certified
        assert report.bnb.congested_links == ["b"]
        assert set(report.meta) == {"generated_at", "version"}

    def test_unknown_link(self, two_link_report):
        with pytest.raises(KeyError):
            two_link_report.link("zz")

    def test_json_round_trip(self, tmp_path, two_link_report):
        path = tmp_path / "report.json"
        write_report(path, two_link_report)
        assert load_report(path) == two_link_report

    def test_without_meta_is_deterministic(self, two_link):
        state = StateVector(states={"a": 1, "b": 0})
        texts = []
        for _ in range(2):
            result = assign(two_link, demands(("1", "2", 1000)), state, epsilon=1e-3, config=CONFIG)
            texts.append(dump_report(build_assign_report(two_link, result, UE_CONFIG, False)))
        assert texts[0] == texts[1]
        assert json.loads(texts[0])["meta"] == {}

    def test_infeasible_has_no_numbers(self, one_link):
        result = assign(one_link, demands(("1", "2", 1700)), config=CONFIG)
        report = build_assign_report(one_link, result, UE_CONFIG, include_meta=False)
        assert report.status == "infeasible"
        assert not report.feasible
        assert report.objective is None
        assert report.links[0].flow is None
        # nan を含まないので JSON として読める
        json.loads(dump_report(report))

    def test_render(self, two_link_report):
        text = render_text(two_link_report, show_nodes=True)
        assert "リンク流量" in text
        assert "上下界の推移" in text
        assert "凸2次計画の記録" in text
        assert "ε 大域最適" in text


    def test_seed_from_network_meta(self, two_link):
        network = build_network(
            ["1", "2"], list(two_link.links), name="seeded", meta={"seed": 7, "rng": "PCG64"}
        )
        state = StateVector(states={"a": 1, "b": 0})
        result = assign(network, demands(("1", "2", 1000)), state, epsilon=1e-3, config=CONFIG)
        report = build_assign_report(network, result, UE_CONFIG, include_meta=False)
        assert report.config.seed == 7
        assert "シード" in render_text(report)
        assert UE_CONFIG.seed is None

    def test_no_seed_without_meta(self, two_link_report):
        assert two_link_report.config.seed is None


class TestReferenceCheck:
    @pytest.mark.parametrize(
        ("value", "verdict"),
        [
            (100.5, ReferenceVerdict.WITHIN),
            (99.0, ReferenceVerdict.WITHIN),
            (98.0, ReferenceVerdict.BELOW),
            (101.5, ReferenceVerdict.ABOVE),
        ],
    )
    def test_verdict(self, value, verdict):
        check = compare_with_reference(value, 100.0)
        assert check.verdict == verdict
        assert check.flagged == (verdict != ReferenceVerdict.WITHIN)
        assert check.relative_difference == pytest.approx((value - 100.0) / 100.0)

    @pytest.mark.parametrize("reference", [0.0, float("nan"), float("inf")])
    def test_invalid_reference(self, reference):
        with pytest.raises(ValueError):
            compare_with_reference(100.0, reference)

    def test_assign_report_flags_lower_value(self, tmp_path, two_link):
        state = StateVector(states={"a": 1, "b": 0})
        result = assign(two_link, demands(("1", "2", 1000)), state, epsilon=1e-3, config=CONFIG)
        report = build_assign_report(
            two_link,
            result,
            UE_CONFIG,
            include_meta=False,
            reference_potential=result.potential * 1.05,
        )
        assert report.reference.verdict == ReferenceVerdict.BELOW
        assert report.reference.value == pytest.approx(result.potential)
        assert "参照値" in render_text(report)
        path = tmp_path / "report.json"
        write_report(path, report)
        assert load_report(path).reference == report.reference

    def test_no_reference_by_default(self, two_link_report):
        assert two_link_report.reference is None


class TestEvolveReport:
    def test_disabled_network(self, one_link):
        evolution = evolve(one_link, demands(("1", "2", 1680)), config=CONFIG)
        report = build_evolve_report(one_link, evolution, UE_CONFIG, include_meta=False)
        assert report.kind == "evolve"
        assert report.status == "disabled(2)"
        assert not report.feasible
        assert [lv.index for lv in report.levels] == [1, 2]
        assert report.levels[0].bottleneck == ["1-2"]
        assert report.levels[1].congested == ["1-2"]
        assert report.levels[1].flows == {}
        # リンク表は流量のある第1段階
        assert report.links[0].state == 1
        assert report.links[0].flow == pytest.approx(1680.0, abs=1e-3)

    def test_round_trip(self, tmp_path, one_link):
        evolution = evolve(one_link, demands(("1", "2", 1000)), config=CONFIG)
        report = build_evolve_report(one_link, evolution, UE_CONFIG)
        assert report.feasible
        path = tmp_path / "evolve.json"
        write_report(path, report)
        loaded = load_report(path)
        assert loaded == report
        assert str(loaded.verdict) == "totally_uncongested"

    def test_render(self, one_link):
        evolution = evolve(one_link, demands(("1", "2", 1680)), config=CONFIG)
        text = render_text(build_evolve_report(one_link, evolution, UE_CONFIG))
        assert "渋滞域の進展" in text
        assert "disabled(2)" in text


class TestLoadReport:
    def test_missing_file(self, tmp_path):
        with pytest.raises(InputFileError):
            load_report(tmp_path / "none.json")

    def test_broken_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(InputFileError) as exc:
            load_report(path)
        assert exc.value.location == "1:2"

    def test_invalid_report(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"kind": "other"}), encoding="utf-8")
        with pytest.raises(InputFileError):
            load_report(path)


def test_consistency_table(seven_node_network):
    console = Console(record=True, width=200)
    console.print(consistency_table(check_network(seven_node_network)))
    text = console.export_text()
    assert "係数の整合性" in text
    assert "1-2" in text


class TestPlots:
    def test_write_plots(self, tmp_path, one_link):
        pytest.importorskip("matplotlib")
        pytest.importorskip("networkx")
        from congestion_assign.report.plots import write_plots

        evolution = evolve(one_link, demands(("1", "2", 1680)), config=CONFIG)
        report = build_evolve_report(one_link, evolution, UE_CONFIG)
        written = write_plots(report, tmp_path)
        names = sorted(p.name for p in written)
        assert names == ["link_1-2.svg", "zone_level1.svg", "zone_level2.svg"]
        assert all(p.stat().st_size > 0 for p in written)

    def test_assign_zone_plot(self, tmp_path, two_link_report):
        pytest.importorskip("matplotlib")
        pytest.importorskip("networkx")
        from congestion_assign.report.plots import write_plots

        written = write_plots(two_link_report, tmp_path)
        assert (tmp_path / "zone.svg") in written

    def test_same_report_same_svg(self, tmp_path, two_link_report):
        pytest.importorskip("matplotlib")
        pytest.importorskip("networkx")
        from congestion_assign.report.plots import write_plots

        first = write_plots(two_link_report, tmp_path / "a")
        second = write_plots(two_link_report, tmp_path / "b")
        for p, q in zip(first, second):
            assert p.read_bytes() == q.read_bytes()

    def test_parallel_links_are_separate_edges(self, two_link_report):
        pytest.importorskip("matplotlib")
        pytest.importorskip("networkx")
        from congestion_assign.report.plots import link_graph

        graph = link_graph(two_link_report.links)
        assert graph.number_of_edges() == 2
        assert sorted(key for _, _, key in graph.edges(keys=True)) == ["a", "b"]
