"""Scenario files: closed-loop run configuration, loading, and validation.

A scenario bundles the building network, the operating context, a disturbance
schedule, the controller/plant selection, gains, the horizon, mid-run
parameter events, and audit windows.  Files are YAML (comment-capable,
human-editable); the schema is documented in the package README and the
bundled ``scenarios/*.yaml``.

Loading is eager about validation: every model invariant plus the
controller-specific solvability conditions (strict convexity and the
set-point condition for the decentralized method, Hessian positive
semi-definiteness for the distributed one) are checked across all schedule
breakpoints before a single tick runs.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .network import (
    BuildingNetwork,
    Mode,
    OperatingContext,
    ZoneParams,
    validate_context,
)
from .primal_dual import GainSet
from .problems import (
    ProblemInstance,
    comfort_box_samples,
    flow_hessian_psd_check,
    set_point_condition_check,
    strict_convexity_bound,
)
from .schedule import DisturbanceSchedule

CONTROLLERS = ("method1", "method2", "constant_flow")
PLANTS = ("full", "approx")
# context fields that parameter events may change mid-run
EVENT_KEYS = ("energy_weight", "total_flow_cap", "supply_temp", "fan_bound")


@dataclass(frozen=True)
class ParameterEvent:
    """A context-field change applied at the first tick with t >= time."""

    time_hours: float
    key: str
    value: float

    def __post_init__(self):
        if self.key not in EVENT_KEYS:
            raise ConfigError(f"event key must be one of {EVENT_KEYS}, got {self.key!r}")
        if self.time_hours < 0:
            raise ConfigError(f"event time must be >= 0, got {self.time_hours}")


@dataclass(frozen=True)
class Scenario:
    """Validated closed-loop run configuration."""

    name: str
    net: BuildingNetwork
    ctx: OperatingContext
    schedule: DisturbanceSchedule
    controller: str = "method1"
    plant: str = "full"
    gains: GainSet = field(default_factory=GainSet)
    horizon_hours: float = 24.0
    dt_seconds: float = 0.5
    stride: int = 120
    deriv_tau: float = 0.5
    events: tuple[ParameterEvent, ...] = ()
    audit_windows: tuple[tuple[float, float], ...] = ()
    initial_temps: np.ndarray | None = None
    initial_flows: np.ndarray | None = None
    constant_flows: np.ndarray | None = None

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {CONTROLLERS}")
        if self.plant not in PLANTS:
            raise ConfigError(f"plant must be one of {PLANTS}")
        if not self.dt_seconds > 0:
            raise ConfigError("dt_seconds must be > 0")
        if not self.horizon_hours > 0:
            raise ConfigError("horizon_hours must be > 0")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        n_ticks = self.horizon_hours * 3600.0 / self.dt_seconds
        if abs(n_ticks - round(n_ticks)) > 1e-9:
            raise ConfigError("horizon must be an integer number of ticks")
        if round(n_ticks) % self.stride != 0:
            raise ConfigError(
                f"tick count {int(round(n_ticks))} must be divisible by stride {self.stride}"
            )
        validate_context(self.net, self.ctx)
        if self.schedule.n_zones != self.net.n_zones:
            raise ConfigError(
                f"schedule carries {self.schedule.n_zones} gains per breakpoint, "
                f"network has {self.net.n_zones} zones"
            )
        times = [e.time_hours for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ConfigError("events must be time-sorted")
        for a, b in self.audit_windows:
            if not (0.0 <= a < b <= self.horizon_hours):
                raise ConfigError(f"audit window ({a}, {b}) outside the horizon")
        for name in ("initial_temps", "initial_flows", "constant_flows"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (self.net.n_zones,):
                    raise ConfigError(f"{name} must have one entry per zone")
                object.__setattr__(self, name, v)
        if self.controller == "constant_flow" and self.constant_flows is None:
            raise ConfigError("constant_flow controller needs constant_flows")

    @property
    def n_ticks(self) -> int:
        return int(round(self.horizon_hours * 3600.0 / self.dt_seconds))

    def context_at(self, t_hours: float) -> OperatingContext:
        """Context with every event at time <= t applied."""
        ctx = self.ctx
        for ev in self.events:
            if ev.time_hours <= t_hours:
                ctx = replace(ctx, **{ev.key: ev.value})
        return ctx

    def default_audit_windows(self) -> tuple[tuple[float, float], ...]:
        """Last 10 minutes before each event plus the end of the horizon."""
        if self.audit_windows:
            return self.audit_windows
        windows = []
        for ev in self.events:
            if ev.time_hours > 0.25:
                windows.append((ev.time_hours - 1.0 / 6.0, ev.time_hours))
        windows.append((self.horizon_hours - 1.0 / 6.0, self.horizon_hours))
        return tuple(windows)


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return mapping[key]


def _zone_from_dict(d: dict, idx: int) -> ZoneParams:
    where = f"zones[{idx}]"
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {
        "capacitance", "resistance_out", "set_point", "comfort_min", "comfort_max",
        "flow_min", "flow_max", "weight", "supply_temp",
    }
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    try:
        return ZoneParams(
            capacitance=float(_require(d, "capacitance", where)),
            resistance_out=float(_require(d, "resistance_out", where)),
            set_point=float(_require(d, "set_point", where)),
            comfort_min=float(_require(d, "comfort_min", where)),
            comfort_max=float(_require(d, "comfort_max", where)),
            flow_min=float(_require(d, "flow_min", where)),
            flow_max=float(_require(d, "flow_max", where)),
            weight=float(_require(d, "weight", where)),
            supply_temp=(None if d.get("supply_temp") is None else float(d["supply_temp"])),
        )
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def scenario_from_dict(doc: dict, name_fallback: str = "scenario") -> Scenario:
    """Build and validate a Scenario from parsed YAML."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario file must contain a mapping at the top level")
    zones = tuple(
        _zone_from_dict(z, i) for i, z in enumerate(_require(doc, "zones", "scenario"))
    )
    edges = tuple(
        (int(e[0]), int(e[1]), float(e[2])) for e in doc.get("edges", [])
    )
    net = BuildingNetwork(zones=zones, edges=edges)

    ctx_doc = _require(doc, "context", "scenario")
    known_ctx = {
        "mode", "supply_temp", "specific_heat", "cop", "fan_coeff", "fan_bound",
        "energy_weight", "total_flow_cap",
    }
    unknown = set(ctx_doc) - known_ctx
    if unknown:
        raise ConfigError(f"context: unknown field(s) {sorted(unknown)}")
    ctx = OperatingContext(
        mode=Mode(_require(ctx_doc, "mode", "context")),
        supply_temp=float(_require(ctx_doc, "supply_temp", "context")),
        specific_heat=float(ctx_doc.get("specific_heat", 1.012)),
        cop=float(ctx_doc.get("cop", 2.9)),
        fan_coeff=float(ctx_doc.get("fan_coeff", 2.0)),
        fan_bound=float(ctx_doc.get("fan_bound", 1.0)),
        energy_weight=float(ctx_doc.get("energy_weight", 1.0)),
        total_flow_cap=float(ctx_doc.get("total_flow_cap", 0.5)),
    )

    sched_doc = _require(doc, "schedule", "scenario")
    bps = []
    for k, bp in enumerate(_require(sched_doc, "breakpoints", "schedule")):
        where = f"schedule.breakpoints[{k}]"
        bps.append(
            (
                float(_require(bp, "time_hours", where)),
                float(_require(bp, "outdoor", where)),
                np.asarray(_require(bp, "gains", where), dtype=float),
            )
        )
    schedule = DisturbanceSchedule(
        breakpoints=tuple(bps),
        interpolation=str(sched_doc.get("interpolation", "hold")),
    )

    gains_doc = doc.get("gains", {})
    try:
        gains = GainSet(**{k: float(v) for k, v in gains_doc.items()})
    except TypeError as exc:
        raise ConfigError(f"gains: {exc}") from exc

    events = tuple(
        ParameterEvent(
            time_hours=float(_require(e, "time_hours", f"events[{k}]")),
            key=str(_require(e, "key", f"events[{k}]")),
            value=float(_require(e, "value", f"events[{k}]")),
        )
        for k, e in enumerate(doc.get("events", []))
    )
    windows = tuple(
        (float(w[0]), float(w[1])) for w in doc.get("audit_windows", [])
    )

    def opt_vec(key):
        return None if doc.get(key) is None else np.asarray(doc[key], dtype=float)

    return Scenario(
        name=str(doc.get("name", name_fallback)),
        net=net,
        ctx=ctx,
        schedule=schedule,
        controller=str(doc.get("controller", "method1")),
        plant=str(doc.get("plant", "full")),
        gains=gains,
        horizon_hours=float(doc.get("horizon_hours", 24.0)),
        dt_seconds=float(doc.get("dt_seconds", 0.5)),
        stride=int(doc.get("stride", 120)),
        deriv_tau=float(doc.get("deriv_tau", 0.5)),
        events=events,
        audit_windows=windows,
        initial_temps=opt_vec("initial_temps"),
        initial_flows=opt_vec("initial_flows"),
        constant_flows=opt_vec("constant_flows"),
    )


def check_scenario(scenario: Scenario) -> list[str]:
    """Run every controller-relevant validator; return human-readable findings.

    Raises :class:`ConfigError` on hard failures (the same checks
    :func:`load_scenario` enforces).
    """
    findings = []
    contexts = {0.0: scenario.ctx}
    for ev in scenario.events:
        contexts[ev.time_hours] = scenario.context_at(ev.time_hours)
    ambient_probes = [
        (t, scenario.schedule.sample(t * 3600.0)) for t in scenario.schedule.times_h
    ]

    for t_ctx, ctx in sorted(contexts.items()):
        if scenario.controller == "method1":
            bound = strict_convexity_bound(ctx)
            bad = [i for i, z in enumerate(scenario.net.zones) if z.weight <= bound]
            if bad:
                raise ConfigError(
                    f"strict-convexity check failed from t={t_ctx} h: zone weight(s) "
                    f"{[scenario.net.zones[i].weight for i in bad]} at zones {bad} "
                    f"are not above the bound w*c_a^2/(s*phi*eta^2) = {bound:.6f}"
                )
            findings.append(
                f"t>={t_ctx:g}h: strict convexity ok "
                f"(bound {strict_convexity_bound(ctx):.6f})"
            )
        for t_amb, amb in ambient_probes:
            inst = ProblemInstance(scenario.net, ctx, amb)
            if scenario.controller == "method1":
                ok = set_point_condition_check(inst)
                if not ok.all():
                    bad = [i for i in range(inst.n) if not ok[i]]
                    raise ConfigError(
                        f"set-point condition (tightness precondition) fails at "
                        f"t={t_amb} h for zone(s) {bad}"
                    )
            if scenario.controller == "method2":
                report = flow_hessian_psd_check(
                    inst, comfort_box_samples(scenario.net, 48, seed=5)
                )
                if not report.psd:
                    raise ConfigError(
                        f"total-flow Hessian not PSD over the comfort box at "
                        f"t={t_amb} h (min eigenvalue {report.min_eigenvalue:.3g})"
                    )
    if scenario.controller == "method1":
        findings.append("set-point condition ok at every breakpoint")
    if scenario.controller == "method2":
        findings.append("flow Hessian PSD over comfort box at every breakpoint")
    return findings


def load_scenario(path: str | Path) -> Scenario:
    """Parse and fully validate a scenario file.

    Parse errors carry the YAML line/column; validation errors name the field
    or the violated condition.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    text = path.read_text()
    if not text.strip():
        raise ConfigError(f"{path}: empty scenario file")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    scenario = scenario_from_dict(doc, name_fallback=path.stem)
    check_scenario(scenario)
    return scenario


def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package."""
    res = importlib.resources.files("hvacopt") / "scenarios" / f"{name}.yaml"
    p = Path(str(res))
    if not p.exists():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return p


def load_bundled(name: str) -> Scenario:
    return load_scenario(bundled_scenario_path(name))
