import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from skipstop import (
    Corridor,
    DemandSpec,
    build_demand_field,
    build_stop_plan,
    bus_params,
    rail_params,
    stage2_solve,
)


@pytest.fixture(scope="session")
def corridor():
    return Corridor(length_km=40.0, cells=80)


@pytest.fixture(scope="session")
def corridor40():
    # coarser grid keeps the O(n^2) oracle sums cheap
    return Corridor(length_km=40.0, cells=40)


@pytest.fixture(scope="session")
def bus20():
    return bus_params(20.0)


@pytest.fixture(scope="session")
def bus10():
    return bus_params(10.0)


@pytest.fixture(scope="session")
def rail20():
    return rail_params(20.0)


@pytest.fixture(scope="session")
def uniform_field(corridor):
    # flat origins, short trips: every directional aggregate is constant
    return build_demand_field(
        corridor,
        DemandSpec(demand_rate=150.0 * 40.0, trip_len_mean=8.0, trip_len_sd=2.0),
    )


@pytest.fixture(scope="session")
def peaked_field(corridor):
    # concentrated origins + long trips: the setting where skipping pays
    return build_demand_field(
        corridor,
        DemandSpec(
            demand_rate=150.0 * 40.0,
            trip_len_mean=12.0,
            trip_len_sd=4.0,
            origin_sd=8.0,
        ),
    )


@pytest.fixture(scope="session")
def peaked_field40(corridor40):
    return build_demand_field(
        corridor40,
        DemandSpec(
            demand_rate=150.0 * 40.0,
            trip_len_mean=12.0,
            trip_len_sd=4.0,
            origin_sd=8.0,
        ),
    )


@pytest.fixture(scope="session")
def uniform_field40(corridor40):
    return build_demand_field(
        corridor40,
        DemandSpec(demand_rate=150.0 * 40.0, trip_len_mean=8.0, trip_len_sd=2.0),
    )


@pytest.fixture(scope="session")
def peaked_solve(peaked_field, bus20):
    return stage2_solve(peaked_field, bus20)


@pytest.fixture(scope="session")
def uniform_solve(uniform_field, bus20):
    return stage2_solve(uniform_field, bus20)


@pytest.fixture(scope="session")
def peaked_plan(peaked_field, peaked_solve):
    best = peaked_solve.best
    return build_stop_plan(
        peaked_field.corridor, best.profiles, best.scalars.m_cw, best.scalars.m_ccw
    )
