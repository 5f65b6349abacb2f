"""Closed-loop driver: plant + controller per tick, trajectory table, CSV.

Each tick: pending parameter events apply (exactly at the first tick whose
time reaches them), the ambient is sampled and held, every zone controller
steps from its measurement, the fan steps from the zone reports, and the
plant advances one fixed RK4 step under the new flow commands.  Rows are
logged every ``stride`` ticks; identical scenarios produce byte-identical
CSV files.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import method1 as m1
from . import method2 as m2
from .errors import ConfigError, NumericalBlowupError, SupplyTempSingularityError
from .network import supply_temps
from .primal_dual import zone_sign_supply
from .scenario import Scenario

CSV_SCHEMA = "hvacopt-trajectory v1"
_BLOWUP_LIMIT = 500.0  # degC; far outside any sane building state


@dataclass
class TrajectoryTable:
    """Column-major logged trajectory."""

    columns: list[str]
    data: dict[str, np.ndarray]
    scenario_name: str
    controller: str
    plant: str

    def __len__(self) -> int:
        return len(self.data[self.columns[0]])

    def rows_between(self, t0_hours: float, t1_hours: float, closed_end: bool) -> np.ndarray:
        t = self.data["t_hours"]
        if closed_end:
            return np.flatnonzero((t >= t0_hours - 1e-12) & (t <= t1_hours + 1e-12))
        return np.flatnonzero((t >= t0_hours - 1e-12) & (t < t1_hours - 1e-12))

    def per_zone(self, stem: str, rows: np.ndarray | None = None) -> np.ndarray:
        cols = []
        k = 0
        while f"{stem}_{k}" in self.data:
            cols.append(f"{stem}_{k}")
            k += 1
        out = np.stack([self.data[c] for c in cols], axis=1)
        return out if rows is None else out[rows]


@dataclass
class SummaryMetrics:
    """Headline numbers for the report."""

    max_comfort_deviation: np.ndarray    # per zone, degC
    mean_comfort_deviation: np.ndarray   # per zone, degC
    energy_proxy_kw: float               # time-averaged coil+fan power
    saturation_intervals: list[tuple[float, float]]


@dataclass
class RunArtifact:
    """Everything a closed-loop run produced."""

    scenario: Scenario
    table: TrajectoryTable
    csv_path: Path | None
    summary: SummaryMetrics | None
    audits: list = dataclasses.field(default_factory=list)
    failed: bool = False
    failure: str | None = None


def _zone_columns(stem: str, n: int) -> list[str]:
    return [f"{stem}_{i}" for i in range(n)]


def _columns_for(controller: str, n: int) -> list[str]:
    cols = ["t_hours"]
    cols += _zone_columns("temp", n)
    if controller in ("method1", "method2"):
        cols += _zone_columns("target", n)
    cols += _zone_columns("flow", n)
    if controller == "method1":
        cols += _zone_columns("flow_match", n)
    if controller in ("method1", "method2"):
        cols += _zone_columns("temp_hi", n)
        cols += _zone_columns("temp_lo", n)
        cols += _zone_columns("flow_hi", n)
        cols += _zone_columns("flow_lo", n)
        cols += ["cap_price"]
    if controller == "method2":
        cols += ["price", "flow_estimate"]
    cols += ["total_flow", "objective"]
    return cols


def run(
    scenario: Scenario,
    out_dir: str | Path | None = None,
    write_csv: bool = True,
) -> RunArtifact:
    """Simulate a scenario end to end and (optionally) write its CSV.

    On numerical blow-up the artifact comes back flagged failed with the rows
    logged so far, rather than raising.
    """
    from .audit import audit_window, summarize

    net, schedule = scenario.net, scenario.schedule
    n = net.n_zones
    dt = scenario.dt_seconds
    n_ticks = scenario.n_ticks
    controller = scenario.controller

    ctx = scenario.ctx
    pending = list(scenario.events)
    temps = (
        net.set_points().copy()
        if scenario.initial_temps is None
        else scenario.initial_temps.copy()
    )

    # controller state
    zone_states: list = []
    fan_m1 = m1.M1FanState()
    fan_m2 = m2.M2FanState()
    broadcast = m2.FanBroadcast(0.0)
    flows = np.zeros(n)
    if controller == "method1":
        for i, z in enumerate(net.zones):
            f0 = None if scenario.initial_flows is None else float(scenario.initial_flows[i])
            zone_states.append(m1.initial_zone_state(z, float(temps[i]), f0))
        flows = np.array([s.flow for s in zone_states])
    elif controller == "method2":
        for i, z in enumerate(net.zones):
            f0 = None if scenario.initial_flows is None else float(scenario.initial_flows[i])
            zone_states.append(m2.initial_zone_state(z, float(temps[i]), f0))
        flows = np.array([s.flow for s in zone_states])
    else:
        flows = scenario.constant_flows.copy()

    # plant parameter arrays (kept local: this loop is the hot path)
    caps = net.capacitances()
    res = net.resistances_out()
    g = net.coupling_matrix()
    gsum = g.sum(axis=1)
    use_coupling = scenario.plant == "full" and net.edges
    ts_vec = supply_temps(net, ctx)
    ca = ctx.specific_heat

    columns = _columns_for(controller, n)
    logged: dict[str, list[float]] = {c: [] for c in columns}
    failed = False
    failure = None

    def log_row(t_hours: float, inst_ctx) -> None:
        logged["t_hours"].append(t_hours)
        for i in range(n):
            logged[f"temp_{i}"].append(float(temps[i]))
        if controller in ("method1", "method2"):
            for i in range(n):
                logged[f"target_{i}"].append(zone_states[i].target_temp)
        for i in range(n):
            logged[f"flow_{i}"].append(float(flows[i]))
        if controller == "method1":
            for i in range(n):
                logged[f"flow_match_{i}"].append(zone_states[i].flow_match)
        if controller in ("method1", "method2"):
            for i in range(n):
                logged[f"temp_hi_{i}"].append(zone_states[i].temp_hi)
                logged[f"temp_lo_{i}"].append(zone_states[i].temp_lo)
                logged[f"flow_hi_{i}"].append(zone_states[i].flow_hi)
                logged[f"flow_lo_{i}"].append(zone_states[i].flow_lo)
            logged["cap_price"].append(
                fan_m1.cap_price if controller == "method1" else fan_m2.cap_price
            )
        if controller == "method2":
            logged["price"].append(broadcast.price)
            logged["flow_estimate"].append(fan_m2.flow_estimate)
        total = float(np.sum(flows))
        logged["total_flow"].append(total)
        # steady-state cost at the current operating point
        if controller in ("method1", "method2"):
            zvals = np.array([s.target_temp for s in zone_states])
        else:
            zvals = temps
        dz = zvals - net.set_points()
        signs = np.array([zone_sign_supply(z, inst_ctx)[0] for z in net.zones])
        coil = (inst_ctx.energy_weight / inst_ctx.cop) * float(
            np.sum(ca * flows * signs * (zvals - ts_vec))
        )
        comfort = 0.5 * float(np.sum(net.weights() * dz * dz))
        fan = inst_ctx.energy_weight * inst_ctx.fan_coeff * total**3
        logged["objective"].append(comfort + coil + fan)

    t = 0.0
    for k in range(n_ticks + 1):
        t_hours = t / 3600.0
        while pending and pending[0].time_hours * 3600.0 <= t + 1e-9:
            ev = pending.pop(0)
            ctx = dataclasses.replace(ctx, **{ev.key: ev.value})
            ts_vec = supply_temps(net, ctx)
        if k % scenario.stride == 0:
            log_row(t_hours, ctx)
        if k == n_ticks:
            break

        amb = schedule.sample(t)

        # controller tick: zones first (previous tick's broadcast), then fan
        try:
            if controller == "method1":
                price = fan_m1.cap_price
                for i, z in enumerate(net.zones):
                    zone_states[i] = m1.zone_step_m1(
                        z, ctx, scenario.gains, zone_states[i], float(temps[i]),
                        price, dt, scenario.deriv_tau,
                    )
                    flows[i] = zone_states[i].flow
                fan_m1 = m1.fan_step_m1(
                    scenario.gains, fan_m1, float(np.sum(flows)), ctx.total_flow_cap, dt
                )
            elif controller == "method2":
                prev = zone_states
                msgs_all = {
                    i: m2.NeighborMsg(
                        temp=float(temps[i]),
                        target_temp=prev[i].target_temp,
                        flow_hi=prev[i].flow_hi,
                        flow_lo=prev[i].flow_lo,
                    )
                    for i in range(n)
                }
                new_states = []
                for i, z in enumerate(net.zones):
                    msgs = {j: msgs_all[j] for j in net.neighbors(i)}
                    new_states.append(
                        m2.zone_step_m2(
                            net, i, ctx, scenario.gains, prev[i], float(temps[i]),
                            msgs, broadcast, dt, scenario.deriv_tau,
                        )
                    )
                zone_states = new_states
                for i in range(n):
                    flows[i] = zone_states[i].flow
                fan_m2, broadcast = m2.fan_step_m2(
                    scenario.gains, fan_m2,
                    [(s.flow, s.flow_dot) for s in zone_states],
                    ctx.total_flow_cap, ctx, dt,
                )
        except SupplyTempSingularityError as exc:
            failed = True
            failure = f"controller singularity at t={t:.1f} s: {exc}"
            break

        # plant: one RK4 step under held flows/ambient
        plant_flows = np.maximum(flows, 0.0)  # dampers cannot blow backwards

        def deriv(y):
            p = (amb.outdoor - y) / res + ca * plant_flows * (ts_vec - y) + amb.gains
            if use_coupling:
                p = p + g @ y - gsum * y
            return p / caps

        k1 = deriv(temps)
        k2 = deriv(temps + 0.5 * dt * k1)
        k3 = deriv(temps + 0.5 * dt * k2)
        k4 = deriv(temps + dt * k3)
        temps = temps + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt

        hi = float(np.max(np.abs(temps)))
        if not np.isfinite(hi) or hi > _BLOWUP_LIMIT:
            bad = int(np.argmax(np.abs(temps)))
            failed = True
            failure = str(NumericalBlowupError(t, bad, float(temps[bad])))
            break

    table = TrajectoryTable(
        columns=columns,
        data={c: np.asarray(v) for c, v in logged.items()},
        scenario_name=scenario.name,
        controller=controller,
        plant=scenario.plant,
    )

    csv_path = None
    if write_csv and out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{scenario.name}.csv"
        write_table_csv(table, csv_path)

    summary = None if failed else summarize(scenario, table)
    artifact = RunArtifact(
        scenario=scenario,
        table=table,
        csv_path=csv_path,
        summary=summary,
        failed=failed,
        failure=failure,
    )
    if not failed:
        for window in scenario.default_audit_windows():
            artifact.audits.append(audit_window(scenario, table, window))
    return artifact


def write_table_csv(table: TrajectoryTable, path: str | Path) -> Path:
    """Write the trajectory as UTF-8 CSV with a schema-stamped comment line."""
    path = Path(path)
    lines = [
        f"# {CSV_SCHEMA} scenario={table.scenario_name} "
        f"controller={table.controller} plant={table.plant}"
    ]
    lines.append(",".join(table.columns))
    n_rows = len(table)
    cols = [table.data[c] for c in table.columns]
    for r in range(n_rows):
        lines.append(",".join(_fmt(col[r]) for col in cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def read_table_csv(path: str | Path) -> TrajectoryTable:
    """Read back a CSV produced by :func:`write_table_csv`."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# " + CSV_SCHEMA):
        raise ConfigError(f"{path}: not a {CSV_SCHEMA} file")
    meta = dict(
        kv.split("=", 1) for kv in lines[0][2 + len(CSV_SCHEMA):].split() if "=" in kv
    )
    columns = lines[1].split(",")
    body = [ln for ln in lines[2:] if ln]
    data = {c: np.empty(len(body)) for c in columns}
    for r, ln in enumerate(body):
        for c, val in zip(columns, ln.split(",")):
            data[c][r] = float(val)
    return TrajectoryTable(
        columns=columns,
        data=data,
        scenario_name=meta.get("scenario", path.stem),
        controller=meta.get("controller", "method1"),
        plant=meta.get("plant", "full"),
    )
