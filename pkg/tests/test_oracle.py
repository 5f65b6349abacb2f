import numpy as np
import pytest

from hvacopt.errors import ConfigError, InfeasibleError
from hvacopt.network import (
    AmbientSample,
    BuildingNetwork,
    Mode,
    OperatingContext,
    ZoneParams,
)
from hvacopt.oracle import (
    feasible_region_2zone,
    grid_search_2zone,
    slater_probe,
    solve_general,
    solve_relaxed,
)
from hvacopt.problems import (
    DecisionPoint,
    ProblemInstance,
    set_point_condition_check,
    coupled_required_flows,
    feasibility_check,
    objective_full,
    required_flows,
)

from conftest import make_zone, random_network


def std_four_zone(w: float = 1.0, cap: float = 0.5) -> ProblemInstance:
    zones = tuple(make_zone() for _ in range(4))
    net = BuildingNetwork(
        zones=zones,
        edges=((0, 1, 23.0), (1, 2, 23.0), (2, 3, 23.0), (0, 3, 23.0)),
    )
    ctx = OperatingContext(mode=Mode.COOLING, supply_temp=12.8, energy_weight=w,
                           total_flow_cap=cap)
    amb = AmbientSample(outdoor=30.0, gains=np.array([0.3, 0.3, 0.25, 0.35]))
    return ProblemInstance(net, ctx, amb)


def random_cooling_instance(rng: np.random.Generator, heating: bool = False) -> ProblemInstance:
    """Random instance satisfying the set-point condition and strict convexity."""
    while True:
        net = random_network(rng)
        n = net.n_zones
        if heating:
            zones = tuple(
                ZoneParams(
                    capacitance=z.capacitance,
                    resistance_out=z.resistance_out,
                    set_point=20.0 + (z.set_point - 23.0),
                    comfort_min=20.0 + (z.comfort_min - 23.0),
                    comfort_max=20.0 + (z.comfort_max - 23.0),
                    flow_min=z.flow_min,
                    flow_max=z.flow_max,
                    weight=z.weight,
                )
                for z in net.zones
            )
            net = BuildingNetwork(zones=zones, edges=net.edges)
            cap = float(rng.uniform(0.1, 0.3) * n)
            ctx = OperatingContext(
                mode=Mode.HEATING,
                supply_temp=float(rng.uniform(40, 55)),
                total_flow_cap=cap,
                energy_weight=float(rng.uniform(0.2, 1.5)),
                fan_bound=max(1.0, cap * float(rng.uniform(1.0, 1.5))),
            )
            amb = AmbientSample(
                float(rng.uniform(-5, 10)), rng.uniform(0.0, 0.15, n)
            )
        else:
            cap = float(rng.uniform(0.1, 0.3) * n)
            ctx = OperatingContext(
                mode=Mode.COOLING,
                supply_temp=12.8,
                total_flow_cap=cap,
                energy_weight=float(rng.uniform(0.2, 1.5)),
                fan_bound=max(1.0, cap * float(rng.uniform(1.0, 1.5))),
            )
            amb = AmbientSample(
                float(rng.uniform(27, 35)), rng.uniform(0.05, 0.6, n)
            )
        try:
            inst = ProblemInstance(net, ctx, amb)
        except ConfigError:
            continue
        from hvacopt.problems import strict_convexity_check

        if not strict_convexity_check(inst):
            continue
        if not set_point_condition_check(inst).all():
            continue
        try:
            slater_probe(inst, problem="relaxed")
        except InfeasibleError:
            continue
        return inst


def test_solve_relaxed_zero_energy_weight_hits_set_points():
    inst = std_four_zone(w=0.0)
    res = solve_relaxed(inst)
    assert res.converged
    assert res.pt.temps == pytest.approx(inst.net.set_points(), abs=1e-9)
    assert res.pt.flows == pytest.approx(
        np.maximum(required_flows(inst, res.pt.temps), inst.net.flow_mins()), abs=1e-9
    )


def test_solve_relaxed_reference_instance_tight_with_positive_duals():
    inst = std_four_zone(w=1.0)
    res = solve_relaxed(inst)
    assert res.converged
    assert res.report.tight
    assert np.all(res.duals.flow_match > 1e-6)
    assert res.report.max_residual <= 1e-7


def test_solve_relaxed_matches_grid_search(two_zone_net, two_zone_amb):
    ctx = OperatingContext(mode=Mode.COOLING, supply_temp=12.8, total_flow_cap=0.7)
    inst = ProblemInstance(two_zone_net, ctx, two_zone_amb)
    res = solve_relaxed(inst)
    assert res.converged
    brute = grid_search_2zone(inst, resolution=400, problem="approx")
    spacing = max(
        (z.comfort_max - z.comfort_min) / 399.0 for z in two_zone_net.zones
    )
    assert res.pt.temps == pytest.approx(brute.temps, abs=max(1e-3, spacing))
    assert res.pt.flows == pytest.approx(brute.flows, abs=1e-3)


def test_solve_relaxed_binding_cap():
    # cap below the unconstrained total forces saturation with a positive price
    inst = std_four_zone(w=0.1, cap=0.21)
    res = solve_relaxed(inst)
    assert res.converged
    assert float(np.sum(res.pt.flows)) == pytest.approx(0.21, abs=1e-6)
    assert res.duals.cap_price > 0


def test_solve_relaxed_rejects_nonconvex():
    zones = tuple(make_zone(weight=0.01) for _ in range(2))
    net = BuildingNetwork(zones=zones, edges=((0, 1, 23.0),))
    ctx = OperatingContext(mode=Mode.COOLING, supply_temp=12.8, total_flow_cap=0.5)
    inst = ProblemInstance(net, ctx, AmbientSample(30.0, np.array([0.2, 0.2])))
    with pytest.raises(ConfigError, match="convexity"):
        solve_relaxed(inst)


def test_solve_relaxed_tightness_randomized():
    rng = np.random.default_rng(42)
    for k in range(30):
        inst = random_cooling_instance(rng, heating=bool(k % 3 == 2))
        res = solve_relaxed(inst)
        assert res.converged, f"instance {k} residual {res.report.max_residual}"
        f = required_flows(inst, res.pt.temps)
        tight_each = (res.duals.flow_match > 1e-6) | (
            np.abs(f - res.pt.flows) <= 1e-6
        )
        assert tight_each.all(), f"instance {k} not tight"


def test_solve_general_zero_energy_weight_exact_set_points():
    inst = std_four_zone(w=0.0)
    res = solve_general(inst)
    assert res.converged
    assert res.pt.temps == pytest.approx(inst.net.set_points(), abs=1e-9)


def test_solve_general_matches_grid_search(two_zone_net, two_zone_amb):
    ctx = OperatingContext(mode=Mode.COOLING, supply_temp=12.8, total_flow_cap=0.7)
    inst = ProblemInstance(two_zone_net, ctx, two_zone_amb)
    res = solve_general(inst)
    assert res.converged
    brute = grid_search_2zone(inst, resolution=400, problem="general")
    spacing = max(
        (z.comfort_max - z.comfort_min) / 399.0 for z in two_zone_net.zones
    )
    assert res.pt.temps == pytest.approx(brute.temps, abs=max(1e-3, spacing))


def test_solve_general_binding_cap():
    inst = std_four_zone(w=0.1, cap=0.21)
    res = solve_general(inst)
    assert res.converged
    assert float(np.sum(res.pt.flows)) == pytest.approx(0.21, abs=1e-6)
    assert res.duals.cap_price > 0


def test_solve_general_flows_satisfy_coupled_balance():
    inst = std_four_zone(w=1.0)
    res = solve_general(inst)
    assert res.pt.flows == pytest.approx(
        coupled_required_flows(inst, res.pt.temps), abs=1e-12
    )
    report = feasibility_check(inst, res.pt, which="full")
    assert report.feasible


def test_solve_general_beats_random_feasible_probes():
    inst = std_four_zone(w=1.0)
    res = solve_general(inst)
    best = objective_full(inst, res.pt)
    rng = np.random.default_rng(8)
    lo, hi = inst.net.comfort_mins(), inst.net.comfort_maxs()
    checked = 0
    for _ in range(1000):
        z = lo + rng.random(4) * (hi - lo)
        m = coupled_required_flows(inst, z)
        if np.any(m < inst.net.flow_mins()) or np.any(m > inst.net.flow_maxs()):
            continue
        if float(np.sum(m)) > inst.ctx.total_flow_cap:
            continue
        checked += 1
        assert objective_full(inst, DecisionPoint(z, m)) >= best - 1e-9
    assert checked > 100


def test_solve_general_heating():
    zones = tuple(
        make_zone(set_point=21.0, comfort_min=19.0, comfort_max=23.0)
        for _ in range(3)
    )
    net = BuildingNetwork(zones=zones, edges=((0, 1, 23.0), (1, 2, 23.0)))
    ctx = OperatingContext(mode=Mode.HEATING, supply_temp=45.0, total_flow_cap=0.5,
                           energy_weight=0.5)
    inst = ProblemInstance(net, ctx, AmbientSample(2.0, np.array([0.1, 0.05, 0.1])))
    res = solve_general(inst)
    assert res.converged
    # heating trades comfort downward: temperatures sit at or below set points
    assert np.all(res.pt.temps <= net.set_points() + 1e-9)


def test_grid_search_custom_objective(two_zone_net, two_zone_amb):
    ctx = OperatingContext(mode=Mode.COOLING, supply_temp=12.8, total_flow_cap=0.7)
    inst = ProblemInstance(two_zone_net, ctx, two_zone_amb)
    target = (20.0, 21.0)

    def closest(z1, z2, m1, m2):
        return (z1 - target[0]) ** 2 + (z2 - target[1]) ** 2

    pt = grid_search_2zone(inst, resolution=101, objective=closest)
    assert pt.temps == pytest.approx(target, abs=0.2)


def test_grid_search_resolution_guard(two_zone_net, two_zone_amb):
    ctx = OperatingContext(mode=Mode.COOLING, supply_temp=12.8, total_flow_cap=0.7)
    inst = ProblemInstance(two_zone_net, ctx, two_zone_amb)
    with pytest.raises(ConfigError, match="resolution"):
        grid_search_2zone(inst, resolution=2)


def test_grid_search_refinement_is_consistent(two_zone_net, two_zone_amb):
    ctx = OperatingContext(mode=Mode.COOLING, supply_temp=12.8, total_flow_cap=0.7)
    inst = ProblemInstance(two_zone_net, ctx, two_zone_amb)
    coarse = grid_search_2zone(inst, resolution=100, problem="general")
    fine = grid_search_2zone(inst, resolution=400, problem="general")
    spacing = max(
        (z.comfort_max - z.comfort_min) / 99.0 for z in two_zone_net.zones
    )
    assert coarse.temps == pytest.approx(fine.temps, abs=2 * spacing)


def test_feasible_regions_nested_and_convex(two_zone_net, two_zone_amb):
    ctx = OperatingContext(mode=Mode.COOLING, supply_temp=12.8, total_flow_cap=0.7)
    inst = ProblemInstance(two_zone_net, ctx, two_zone_amb)
    box = (14.0, 29.5, 14.0, 29.5)
    masks = {}
    for cap in (0.7, 0.5, 0.3):
        _, _, masks[cap] = feasible_region_2zone(inst, resolution=160, box=box, cap=cap)
    assert masks[0.3].sum() > 0
    assert np.all(masks[0.3] <= masks[0.5])
    assert np.all(masks[0.5] <= masks[0.7])
    # discrete convexity: every row/column of each region is a contiguous run
    for mask in masks.values():
        for axis in (0, 1):
            arr = mask if axis == 0 else mask.T
            for row in arr:
                idx = np.flatnonzero(row)
                if idx.size:
                    assert idx[-1] - idx[0] + 1 == idx.size


def test_slater_probe_failure_is_reported():
    # a cap below the minimum achievable total flow has no feasible point
    zones = tuple(make_zone(flow_min=0.2, flow_max=0.45) for _ in range(2))
    net = BuildingNetwork(zones=zones, edges=((0, 1, 23.0),))
    ctx = OperatingContext(mode=Mode.COOLING, supply_temp=12.8, total_flow_cap=0.25)
    inst = ProblemInstance(net, ctx, AmbientSample(30.0, np.array([0.2, 0.2])))
    with pytest.raises(InfeasibleError):
        slater_probe(inst, problem="relaxed")
