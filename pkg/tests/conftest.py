"""
共通フィクスチャ
"""

from typing import Any

import pytest
import yaml
from hypothesis import HealthCheck
from hypothesis import settings as hypothesis_settings

from congestion_assign.core import DemandTable, Network, StateVector
from congestion_assign.ingest import fixture_path, load_demands, load_network, load_state
from tests import builders

hypothesis_settings.register_profile(
    "default",
    deadline=None,
    # ネットワークのフィクスチャは不変なので例ごとに作り直さなくてよい
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
hypothesis_settings.load_profile("default")


def _reference(name: str) -> dict[str, Any]:
    with open(fixture_path(name), encoding="utf-8") as f:
        data: dict[str, Any] = yaml.safe_load(f)
    return data


# =============================================================================
# 小さなネットワーク
# =============================================================================


@pytest.fixture
def one_link() -> Network:
    return builders.one_link_network()


@pytest.fixture
def two_link() -> Network:
    return builders.two_link_network()


@pytest.fixture
def parallel() -> Network:
    return builders.parallel_uncongested_network()


@pytest.fixture
def diamond() -> Network:
    return builders.diamond_network()


# =============================================================================
# 同梱フィクスチャ
# =============================================================================


@pytest.fixture(scope="session")
def seven_node_network() -> Network:
    return load_network(fixture_path("seven_node.network.yml"))


@pytest.fixture(scope="session")
def seven_node_demands() -> DemandTable:
    return load_demands(fixture_path("seven_node.demands.yml"))


@pytest.fixture(scope="session")
def seven_node_reference() -> dict[str, Any]:
    return _reference("seven_node.reference.yml")


@pytest.fixture(scope="session")
def ten_node_network() -> Network:
    return load_network(fixture_path("ten_node.network.yml"))


@pytest.fixture(scope="session")
def ten_node_demands() -> DemandTable:
    return load_demands(fixture_path("ten_node.demands.yml"))


@pytest.fixture(scope="session")
def ten_node_state(ten_node_network: Network) -> StateVector:
    return load_state(fixture_path("ten_node.state.yml"), ten_node_network)


@pytest.fixture(scope="session")
def ten_node_reference() -> dict[str, Any]:
    return _reference("ten_node.reference.yml")
