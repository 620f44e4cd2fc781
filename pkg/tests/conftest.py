import numpy as np
import pytest

from evcs_planner import ModelParams, bundled_params, bundled_roads
from evcs_planner.core import roads_from_flows
from evcs_planner.network import build_distance_matrix


def path_network(flows, length_km=2.0, spacing_km=None):
    """Roads on a straight line, each adjacent to the next."""
    n = len(flows)
    spacing = length_km if spacing_km is None else spacing_km
    mids = [(k * spacing, 0.0) for k in range(n)]
    nbrs = [[j + 1 for j in (k - 1, k + 1) if 0 <= j < n] for k in range(n)]
    return roads_from_flows(flows, mids, nbrs, length_km)


@pytest.fixture(scope="session")
def table_params():
    """Case-study constants with every open default pinned explicitly."""
    return ModelParams(beta=0.1, eta=1.5, b_min=100.0, b_max=1200.0, r_service_km=3.4,
                       c_site_yuan=680000.0, p_max_kw=60000.0)


@pytest.fixture(scope="session")
def roads():
    return bundled_roads()


@pytest.fixture(scope="session")
def params():
    return bundled_params()


@pytest.fixture(scope="session")
def dm(roads):
    return build_distance_matrix(roads)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
