"""
ネットワーク・需要・品種のテスト
"""

import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from congestion_assign.core import (
    BasicParams,
    Commodity,
    DemandEntry,
    FlowPattern,
    NetworkError,
    StateVector,
    aggregate_by_origin,
    build_network,
    check_demand_nodes,
    conservation_residual,
)
from tests.builders import demands, derived_link


class TestBuildNetwork:
    def test_single_link_incidence(self):
        network = build_network(["1", "2"], [derived_link()])
        assert network.outbound["1"] == ("1-2",)
        assert network.inbound["2"] == ("1-2",)
        assert network.inbound["1"] == ()
        assert network.outbound["2"] == ()

    def test_ten_node_topology(self, ten_node_network):
        assert len(ten_node_network.nodes) == 10
        assert len(ten_node_network.links) == 30
        assert all(len(ten_node_network.outbound[n]) >= 2 for n in ten_node_network.nodes)

    def test_undeclared_endpoint(self):
        with pytest.raises(NetworkError) as exc:
            build_network(["1", "2"], [derived_link("1-3", "1", "3")])
        assert exc.value.link_id == "1-3"

    def test_duplicate_link_id(self):
        with pytest.raises(NetworkError):
            build_network(["1", "2"], [derived_link(), derived_link()])

    def test_duplicate_node(self):
        with pytest.raises(NetworkError):
            build_network(["1", "1", "2"], [derived_link()])

    def test_self_loop(self):
        with pytest.raises(NetworkError):
            build_network(["1"], [derived_link("1-1", "1", "1")])

    def test_dense_index_follows_input_order(self, diamond):
        assert [diamond.link_index[a] for a in diamond.link_ids] == list(range(5))
        assert diamond.link("2-3").tail == "2"
        with pytest.raises(NetworkError):
            diamond.link("9-9")


class TestStateVector:
    def test_uncongested_state(self, diamond):
        state = diamond.uncongested_state()
        assert set(state.states.values()) == {1}
        assert diamond.congested_links(state) == []

    def test_check_state_reorders(self, diamond):
        shuffled = StateVector(states={a: 1 for a in reversed(diamond.link_ids)})
        assert list(diamond.check_state(shuffled).states) == list(diamond.link_ids)

    def test_check_state_unknown_link(self, one_link):
        with pytest.raises(NetworkError):
            one_link.check_state(StateVector(states={"1-2": 1, "x": 0}))

    def test_check_state_missing_link(self, diamond):
        with pytest.raises(NetworkError):
            diamond.check_state(StateVector(states={"1-2": 1}))

    def test_with_congested(self, diamond):
        state = diamond.uncongested_state().with_congested(["2-3", "1-2"])
        assert diamond.congested_links(state) == ["1-2", "2-3"]


class TestDemands:
    def test_negative_demand_rejected(self):
        with pytest.raises(ValidationError):
            DemandEntry(origin="1", destination="2", demand_veh_hr=-1)

    def test_diagonal_dropped(self):
        table = demands(("1", "1", 50), ("1", "2", 10))
        assert len(table.entries) == 1
        assert table.total_demand == 10

    def test_numeric_ids_coerced(self):
        entry = DemandEntry(origin=1, destination=2.0, demand_veh_hr=5)
        assert (entry.origin, entry.destination) == ("1", "2")

    def test_unknown_demand_node(self, one_link):
        with pytest.raises(NetworkError):
            check_demand_nodes(one_link, demands(("1", "7", 10)))

    def test_basic_params_speed_order(self):
        with pytest.raises(ValidationError):
            BasicParams(v_free=40, v_cr=45, w=20, d_jam=120, r_mc=0.05)


class TestAggregateByOrigin:
    def test_ten_node_commodities(self, ten_node_demands):
        commodities = aggregate_by_origin(ten_node_demands)
        assert len(ten_node_demands.entries) == 90
        assert len(commodities) == 10
        assert sum(c.total for c in commodities) == pytest.approx(ten_node_demands.total_demand)

    def test_empty(self):
        assert aggregate_by_origin(demands()) == []

    def test_single_od(self):
        commodities = aggregate_by_origin(demands(("1", "6", 1200)))
        assert len(commodities) == 1
        assert commodities[0].origin == "1"
        assert commodities[0].demands == {"6": 1200}

    def test_zero_entries_skipped(self):
        assert aggregate_by_origin(demands(("1", "2", 0))) == []

    def test_per_od(self, seven_node_demands):
        commodities = aggregate_by_origin(seven_node_demands, per_od=True)
        assert [c.key for c in commodities] == ["1->6", "1->7", "3->5", "3->7"]

    def test_duplicate_pairs_summed(self):
        commodities = aggregate_by_origin(demands(("1", "2", 10), ("1", "2", 5)))
        assert commodities[0].demands == {"2": 15}

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["1", "2", "3", "4"]),
                st.sampled_from(["1", "2", "3", "4"]),
                st.floats(min_value=0, max_value=1e4, allow_nan=False),
            ),
            max_size=30,
        )
    )
    def test_totals_preserved(self, pairs):
        table = demands(*pairs)
        commodities = aggregate_by_origin(table)
        assert sum(c.total for c in commodities) == pytest.approx(table.total_demand)
        assert len({c.origin for c in commodities}) == len(commodities)


class TestConservationResidual:
    def test_zero_flows_zero_demand(self, one_link):
        commodity = Commodity(key="1", origin="1", demands={})
        residual = conservation_residual(one_link, commodity, {"1-2": 0.0})
        assert residual == {"1": 0.0, "2": 0.0}

    def test_sign_convention(self, one_link):
        commodity = Commodity(key="1", origin="1", demands={"2": 100.0})
        residual = conservation_residual(one_link, commodity, {"1-2": 90.0})
        assert residual["1"] == pytest.approx(-10.0)
        assert residual["2"] == pytest.approx(10.0)

    def test_seven_node_scenario1_origin(self, seven_node_network, seven_node_demands, seven_node_reference):
        flows = seven_node_reference["scenarios"][0]["flows"]
        origin1 = next(c for c in aggregate_by_origin(seven_node_demands) if c.origin == "1")
        residual = conservation_residual(seven_node_network, origin1, flows)
        assert residual["1"] == pytest.approx(0.0, abs=1e-3)

    def test_missing_flow(self, diamond):
        commodity = Commodity(key="1", origin="1", demands={"4": 10.0})
        with pytest.raises(NetworkError):
            conservation_residual(diamond, commodity, {"1-2": 10.0})


def test_flow_pattern_aggregation_residual():
    flows = FlowPattern(
        commodity_flows={"1": {"a": 3.0, "b": 1.0}, "2": {"a": 2.0, "b": 0.0}},
        aggregate_flows={"a": 5.0, "b": 1.5},
    )
    assert flows.aggregation_residual() == pytest.approx(0.5)
