"""Equilibrium audits, run summaries, textual reports, and parameter sweeps.

An audit takes a quasi-steady window of a finished run, freezes the ambient
at the window midpoint, solves the matching steady-state problem with the
independent oracle, and reports the per-coordinate gap between the
time-averaged controller state and the certified optimum, together with the
KKT residuals of the averaged state.  Windows that are not quasi-steady
(moving disturbances, a parameter event inside, or visible state drift) are
flagged non-stationary and carry no pass/fail verdict.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import NonStationaryWindowError
from .network import steady_state_for_flows
from .oracle import OracleResult, solve_general, solve_relaxed
from .problems import (
    DecisionPoint,
    DualPoint,
    KktReport,
    ProblemInstance,
    kkt_residual_general,
    kkt_residual_relaxed,
)
from .scenario import Scenario
from .simulate import RunArtifact, SummaryMetrics, TrajectoryTable

GAP_TOL = 1e-3          # degC / kg/s / p.u., per coordinate
TEMP_DRIFT_TOL = 3e-3   # degC of in-window spread before "non-stationary"
FLOW_DRIFT_TOL = 5e-4   # kg/s


@dataclass
class AuditResult:
    """Outcome of auditing one window of a run."""

    window: tuple[float, float]
    stationary: bool
    reason: str | None                 # why the window carries no verdict
    oracle: OracleResult | None
    kkt: KktReport | None
    gap_temps: float
    gap_flows: float
    gap_duals: float
    temp_target_gap: float             # max |measured - ancillary| in window
    min_flow_match: float | None       # smallest required-flow dual (method1)
    cap_price: float
    passed: bool


def _dual_point_from_window(
    table: TrajectoryTable, rows: np.ndarray, with_flow_match: bool
) -> DualPoint:
    def avg(stem):
        return table.per_zone(stem, rows).mean(axis=0)

    return DualPoint(
        temp_hi=avg("temp_hi"),
        temp_lo=avg("temp_lo"),
        flow_hi=avg("flow_hi"),
        flow_lo=avg("flow_lo"),
        cap_price=float(table.data["cap_price"][rows].mean()),
        flow_match=avg("flow_match") if with_flow_match else None,
    )


def audit_window(
    scenario: Scenario,
    table: TrajectoryTable,
    window: tuple[float, float],
    gap_tol: float = GAP_TOL,
) -> AuditResult:
    """Audit one (h1, h2) window of a finished trajectory against the oracle."""
    h1, h2 = float(window[0]), float(window[1])
    if not (0.0 <= h1 < h2 <= scenario.horizon_hours):
        raise NonStationaryWindowError(f"window ({h1}, {h2}) outside the horizon")
    if (h2 - h1) * 3600.0 < 10.0 * scenario.dt_seconds:
        raise NonStationaryWindowError(
            f"window ({h1}, {h2}) shorter than 10 simulation steps"
        )
    closed_end = abs(h2 - scenario.horizon_hours) < 1e-12
    rows = table.rows_between(h1, h2, closed_end)
    if rows.size < 2:
        raise NonStationaryWindowError(
            f"window ({h1}, {h2}) contains fewer than 2 logged samples; "
            f"reduce the stride"
        )

    reason = None
    # the window is half-open: a breakpoint or event landing exactly on its
    # right edge belongs to the next regime, not to this window
    h2_in = h2 - 1e-9 if not closed_end else h2
    if not scenario.schedule.constant_over(h1 * 3600.0, h2_in * 3600.0):
        reason = "disturbances move inside the window"
    if any(h1 < ev.time_hours < h2 for ev in scenario.events):
        reason = "a parameter event falls inside the window"

    temps = table.per_zone("temp", rows)
    flows = table.per_zone("flow", rows)
    controller = scenario.controller
    if reason is None:
        drift_t = float(np.max(temps.max(axis=0) - temps.min(axis=0)))
        drift_m = float(np.max(flows.max(axis=0) - flows.min(axis=0)))
        if drift_t > TEMP_DRIFT_TOL or drift_m > FLOW_DRIFT_TOL:
            reason = (
                f"state drifts inside the window (temp spread {drift_t:.2g} degC, "
                f"flow spread {drift_m:.2g} kg/s)"
            )

    if reason is not None:
        return AuditResult(
            window=(h1, h2), stationary=False, reason=reason, oracle=None, kkt=None,
            gap_temps=np.nan, gap_flows=np.nan, gap_duals=np.nan,
            temp_target_gap=np.nan, min_flow_match=None, cap_price=np.nan,
            passed=False,
        )

    ctx = scenario.context_at(h1)
    amb = scenario.schedule.sample(0.5 * (h1 + h2) * 3600.0)
    inst = ProblemInstance(scenario.net, ctx, amb)
    avg_temps = temps.mean(axis=0)
    avg_flows = flows.mean(axis=0)

    if controller == "constant_flow":
        z_ref = steady_state_for_flows(scenario.net, ctx, amb, avg_flows)
        gap_t = float(np.max(np.abs(avg_temps - z_ref)))
        return AuditResult(
            window=(h1, h2), stationary=True, reason=None, oracle=None, kkt=None,
            gap_temps=gap_t, gap_flows=0.0, gap_duals=0.0,
            temp_target_gap=0.0, min_flow_match=None, cap_price=0.0,
            passed=gap_t <= gap_tol,
        )

    targets = table.per_zone("target", rows)
    avg_targets = targets.mean(axis=0)
    temp_target_gap = float(np.max(np.abs(temps - targets)))

    if controller == "method1":
        oracle = solve_relaxed(inst)
        duals = _dual_point_from_window(table, rows, with_flow_match=True)
        kkt = kkt_residual_relaxed(inst, DecisionPoint(avg_targets, avg_flows), duals)
        dual_gaps = [
            np.max(np.abs(duals.flow_match - oracle.duals.flow_match)),
            np.max(np.abs(duals.temp_hi - oracle.duals.temp_hi)),
            np.max(np.abs(duals.temp_lo - oracle.duals.temp_lo)),
            np.max(np.abs(duals.flow_hi - oracle.duals.flow_hi)),
            np.max(np.abs(duals.flow_lo - oracle.duals.flow_lo)),
            abs(duals.cap_price - oracle.duals.cap_price),
        ]
        min_fm = float(np.min(duals.flow_match))
    else:
        oracle = solve_general(inst)
        duals = _dual_point_from_window(table, rows, with_flow_match=False)
        kkt = kkt_residual_general(inst, DecisionPoint(avg_targets, avg_flows), duals)
        dual_gaps = [
            np.max(np.abs(duals.temp_hi - oracle.duals.temp_hi)),
            np.max(np.abs(duals.temp_lo - oracle.duals.temp_lo)),
            np.max(np.abs(duals.flow_hi - oracle.duals.flow_hi)),
            np.max(np.abs(duals.flow_lo - oracle.duals.flow_lo)),
            abs(duals.cap_price - oracle.duals.cap_price),
        ]
        min_fm = None

    gap_temps = float(np.max(np.abs(avg_targets - oracle.pt.temps)))
    gap_flows = float(np.max(np.abs(avg_flows - oracle.pt.flows)))
    gap_duals = float(np.max(dual_gaps))
    passed = (
        oracle.converged
        and gap_temps <= gap_tol
        and gap_flows <= gap_tol
        and gap_duals <= gap_tol
        and temp_target_gap <= gap_tol
    )
    return AuditResult(
        window=(h1, h2), stationary=True, reason=None, oracle=oracle, kkt=kkt,
        gap_temps=gap_temps, gap_flows=gap_flows, gap_duals=gap_duals,
        temp_target_gap=temp_target_gap, min_flow_match=min_fm,
        cap_price=duals.cap_price, passed=passed,
    )


# ---------------------------------------------------------------------------
# Summary + report
# ---------------------------------------------------------------------------

def saturation_intervals(
    scenario: Scenario, table: TrajectoryTable, tol: float = 1e-3
) -> list[tuple[float, float]]:
    """Contiguous logged spans where the total flow sits at the active cap."""
    t = table.data["t_hours"]
    total = table.data["total_flow"]
    caps = np.array([scenario.context_at(th).total_flow_cap for th in t])
    at_cap = total >= caps - tol
    spans = []
    start = None
    for k, flag in enumerate(at_cap):
        if flag and start is None:
            start = t[k]
        elif not flag and start is not None:
            spans.append((float(start), float(t[k - 1])))
            start = None
    if start is not None:
        spans.append((float(start), float(t[-1])))
    return spans


def summarize(scenario: Scenario, table: TrajectoryTable) -> SummaryMetrics:
    if len(table) == 0:
        return SummaryMetrics(
            max_comfort_deviation=np.zeros(scenario.net.n_zones),
            mean_comfort_deviation=np.zeros(scenario.net.n_zones),
            energy_proxy_kw=0.0,
            saturation_intervals=[],
        )
    temps = table.per_zone("temp")
    dev = np.abs(temps - scenario.net.set_points()[None, :])
    flows = table.per_zone("flow")
    t = table.data["t_hours"]
    # instantaneous coil + fan power, independent of the tradeoff weight
    from .network import supply_temps as _sup
    from .primal_dual import zone_sign_supply as _zss

    ts = _sup(scenario.net, scenario.ctx)
    signs = np.array([_zss(z, scenario.ctx)[0] for z in scenario.net.zones])
    ca = scenario.ctx.specific_heat
    coil = np.sum(ca * flows * signs * (temps - ts[None, :]), axis=1) / scenario.ctx.cop
    fan = scenario.ctx.fan_coeff * np.sum(flows, axis=1) ** 3
    power = coil + fan
    energy = float(np.trapezoid(power, t) / max(t[-1] - t[0], 1e-12)) if len(t) > 1 else float(power[0])
    return SummaryMetrics(
        max_comfort_deviation=dev.max(axis=0),
        mean_comfort_deviation=dev.mean(axis=0),
        energy_proxy_kw=energy,
        saturation_intervals=saturation_intervals(scenario, table),
    )


def report(artifact: RunArtifact) -> str:
    """Human-readable run summary."""
    sc = artifact.scenario
    lines = [
        f"run report: {sc.name}",
        f"  controller={sc.controller} plant={sc.plant} dt={sc.dt_seconds}s "
        f"horizon={sc.horizon_hours}h",
    ]
    if artifact.failed:
        lines.append(f"  FAILED: {artifact.failure}")
        lines.append(f"  rows logged before failure: {len(artifact.table)}")
        return "\n".join(lines)
    if len(artifact.table) == 0:
        lines.append("  no data")
        return "\n".join(lines)
    if sc.events:
        lines.append("  events:")
        for ev in sc.events:
            lines.append(f"    t={ev.time_hours:g}h  {ev.key} -> {ev.value:g}")
    s = artifact.summary
    lines.append("  comfort deviation |T - set| per zone (degC):")
    for i in range(sc.net.n_zones):
        lines.append(
            f"    zone {i}: max {s.max_comfort_deviation[i]:.3f}  "
            f"mean {s.mean_comfort_deviation[i]:.3f}"
        )
    lines.append(f"  energy proxy (time-avg coil+fan power): {s.energy_proxy_kw:.4f} kW")
    if s.saturation_intervals:
        spans = ", ".join(f"{a:.2f}-{b:.2f}h" for a, b in s.saturation_intervals)
        lines.append(f"  total flow at cap during: {spans}")
    else:
        lines.append("  total flow never reaches the cap")
    if artifact.audits:
        lines.append("  audits:")
        for a in artifact.audits:
            w = f"{a.window[0]:.2f}-{a.window[1]:.2f}h"
            if not a.stationary:
                lines.append(f"    {w}: non-stationary ({a.reason}); no verdict")
                continue
            verdict = "pass" if a.passed else "FAIL"
            extra = ""
            if a.min_flow_match is not None:
                tight = "yes" if (a.kkt is not None and a.kkt.tight) else "no"
                extra = f" min_flow_match_dual={a.min_flow_match:.4g} tight={tight}"
            if a.oracle is not None:
                lines.append(
                    f"    {w}: {verdict}  gap T={a.gap_temps:.2e} m={a.gap_flows:.2e} "
                    f"duals={a.gap_duals:.2e} |T-Z|={a.temp_target_gap:.2e}"
                    f" cap_price={a.cap_price:.4g}{extra}"
                )
            else:
                lines.append(
                    f"    {w}: {verdict}  gap T={a.gap_temps:.2e} (fixed-flow steady state)"
                )
        m1_audits = [a for a in artifact.audits if a.stationary and a.min_flow_match is not None]
        if m1_audits and all(a.min_flow_match > 0 for a in m1_audits):
            lines.append(
                "  required-flow multiplier positive for all zones at every audit "
                "window (relaxation tight)"
            )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Parameter sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepPoint:
    value: float
    comfort_deviation: float     # time-avg mean |T - set| across zones
    energy_proxy_kw: float
    artifact: RunArtifact


def sweep(
    scenario: Scenario,
    param: str,
    values: list[float],
    out_dir=None,
) -> list[SweepPoint]:
    """Re-run the scenario for each value of one context parameter.

    Events touching the swept parameter are dropped so the value holds for
    the whole horizon; runs execute sequentially and deterministically.
    """
    from .simulate import run as _run

    points = []
    for v in values:
        ctx = dataclasses.replace(scenario.ctx, **{param: v})
        events = tuple(e for e in scenario.events if e.key != param)
        sc = dataclasses.replace(
            scenario, ctx=ctx, events=events, name=f"{scenario.name}_{param}_{v:g}"
        )
        artifact = _run(sc, out_dir=out_dir, write_csv=out_dir is not None)
        comfort = float(np.mean(artifact.summary.mean_comfort_deviation))
        points.append(
            SweepPoint(
                value=float(v),
                comfort_deviation=comfort,
                energy_proxy_kw=artifact.summary.energy_proxy_kw,
                artifact=artifact,
            )
        )
    return points


def sweep_report(points: list[SweepPoint], param: str) -> str:
    lines = [f"tradeoff sweep over {param}:"]
    lines.append(f"  {param:>10}  comfort_dev_degC  energy_proxy_kW")
    for p in points:
        lines.append(
            f"  {p.value:>10.4g}  {p.comfort_deviation:>16.4f}  {p.energy_proxy_kw:>15.4f}"
        )
    return "\n".join(lines)
