import numpy as np
import pytest

from hvacopt.network import (
    AmbientSample,
    BuildingNetwork,
    Mode,
    OperatingContext,
    ZoneParams,
)


def make_zone(**kw) -> ZoneParams:
    base = dict(
        capacitance=20.0,
        resistance_out=15.0,
        set_point=24.0,
        comfort_min=22.5,
        comfort_max=25.5,
        flow_min=0.01,
        flow_max=0.45,
        weight=0.1,
    )
    base.update(kw)
    return ZoneParams(**base)


@pytest.fixture
def single_zone_net() -> BuildingNetwork:
    return BuildingNetwork(zones=(make_zone(),))


@pytest.fixture
def cooling_ctx() -> OperatingContext:
    return OperatingContext(mode=Mode.COOLING, supply_temp=12.8)


@pytest.fixture
def two_zone_net() -> BuildingNetwork:
    """The two-room system used in the worked convexity example.

    Wide comfort bands: that example carries no comfort constraints.
    """
    z1 = make_zone(resistance_out=15.0, comfort_min=14.0, comfort_max=30.0,
                   set_point=24.0, flow_max=0.5)
    z2 = make_zone(resistance_out=16.0, comfort_min=14.0, comfort_max=30.0,
                   set_point=23.0, flow_max=0.5)
    return BuildingNetwork(zones=(z1, z2), edges=((0, 1, 18.0),))


@pytest.fixture
def two_zone_ctx() -> OperatingContext:
    return OperatingContext(
        mode=Mode.COOLING, supply_temp=12.8, total_flow_cap=0.7, fan_bound=1.0
    )


@pytest.fixture
def two_zone_amb() -> AmbientSample:
    return AmbientSample(outdoor=30.0, gains=np.array([0.1, 0.2]))


def random_network(rng: np.random.Generator, n: int | None = None) -> BuildingNetwork:
    """Random valid cooling network with 2-6 zones and a random spanning tree."""
    if n is None:
        n = int(rng.integers(2, 7))
    zones = []
    for _ in range(n):
        set_point = float(rng.uniform(21.0, 25.0))
        band = float(rng.uniform(1.0, 2.5))
        zones.append(
            ZoneParams(
                capacitance=float(rng.uniform(10.0, 40.0)),
                resistance_out=float(rng.uniform(8.0, 25.0)),
                set_point=set_point,
                comfort_min=set_point - band,
                comfort_max=set_point + band,
                flow_min=float(rng.uniform(0.0, 0.02)),
                flow_max=float(rng.uniform(0.3, 0.6)),
                weight=float(rng.uniform(0.08, 0.5)),
            )
        )
    edges = []
    for j in range(1, n):
        i = int(rng.integers(0, j))
        edges.append((i, j, float(rng.uniform(10.0, 40.0))))
    return BuildingNetwork(zones=tuple(zones), edges=tuple(edges))
