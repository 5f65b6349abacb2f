"""Building thermal network: zone graph, RC dynamics, and open-loop integration.

A building is an undirected connected graph of thermal zones.  Each zone i has
a lumped air capacitance ``C_i`` (kJ/degC), a wall resistance to the outside
``R_i`` (degC/kW), and optional wall resistances ``R_ij`` (degC/kW) to
neighbouring zones.  The controlled input is the supply-air mass flow ``m_i``
(kg/s); the supply air enters at temperature ``T_s`` (degC).

Zone temperature dynamics (full model)::

    C_i dT_i/dt = (T_out - T_i)/R_i + sum_j (T_j - T_i)/R_ij
                  + c_a m_i (T_s - T_i) + Q_i

The approximate model drops the inter-zone sum.  Both right-hand sides, a
fixed-step order-4 integrator, the linear steady-state solve, and a stability
(Hurwitz) check live here.  Units are fixed package-wide: degC, kW, kJ, kg/s,
seconds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatchError, NumericalBlowupError


class Mode(enum.Enum):
    """Operating mode of the air handling unit."""

    COOLING = "cooling"
    HEATING = "heating"

    @property
    def sign(self) -> float:
        """+1 for cooling (zones above supply temp), -1 for heating."""
        return 1.0 if self is Mode.COOLING else -1.0


@dataclass(frozen=True)
class ZoneParams:
    """Static parameters of one thermal zone.

    ``supply_temp`` overrides the context-wide supply-air temperature for this
    zone (used by the community variant where each house has its own unit and
    may even run in a different mode).
    """

    capacitance: float          # C_i, kJ/degC
    resistance_out: float       # R_i, degC/kW
    set_point: float            # degC
    comfort_min: float          # degC
    comfort_max: float          # degC
    flow_min: float             # kg/s
    flow_max: float             # kg/s
    weight: float               # comfort weight r_i, p.u.
    supply_temp: float | None = None  # per-zone T_s override, degC

    def __post_init__(self):
        if not self.capacitance > 0:
            raise ConfigError(f"capacitance must be > 0, got {self.capacitance}")
        if not self.resistance_out > 0:
            raise ConfigError(f"resistance_out must be > 0, got {self.resistance_out}")
        if not (self.flow_max > self.flow_min >= 0):
            raise ConfigError(
                f"need flow_max > flow_min >= 0, got [{self.flow_min}, {self.flow_max}]"
            )
        if not (self.comfort_min < self.set_point < self.comfort_max):
            raise ConfigError(
                f"need comfort_min < set_point < comfort_max, got "
                f"{self.comfort_min} / {self.set_point} / {self.comfort_max}"
            )
        if not self.weight >= 0:
            raise ConfigError(f"weight must be >= 0, got {self.weight}")


@dataclass(frozen=True)
class BuildingNetwork:
    """Zone list plus undirected edges (i, j, R_ij) with 0-based i < j."""

    zones: tuple[ZoneParams, ...]
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "zones", tuple(self.zones))
        object.__setattr__(self, "edges", tuple((int(i), int(j), float(r)) for i, j, r in self.edges))
        n = len(self.zones)
        if n == 0:
            raise ConfigError("network needs at least one zone")
        seen = set()
        for i, j, r in self.edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigError(f"edge ({i},{j}) references a zone outside 0..{n - 1}")
            if i == j:
                raise ConfigError(f"self-loop on zone {i}")
            if i > j:
                raise ConfigError(f"edge ({i},{j}) must be ordered i < j")
            if (i, j) in seen:
                raise ConfigError(f"duplicate edge ({i},{j})")
            if not r > 0:
                raise ConfigError(f"edge ({i},{j}) resistance must be > 0, got {r}")
            seen.add((i, j))
        # A building's zone graph must be connected.  A network with no edges
        # at all is the decoupled (community) configuration: every pairwise
        # resistance is infinite, which is expressed by omitting the edge.
        if self.edges and not self._connected():
            raise ConfigError("zone graph must be connected")

    def _connected(self) -> bool:
        n = len(self.zones)
        adj = [[] for _ in range(n)]
        for i, j, _ in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            for k in adj[stack.pop()]:
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
        return len(seen) == n

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    def neighbors(self, i: int) -> dict[int, float]:
        """Map neighbour index -> R_ij for zone i."""
        out: dict[int, float] = {}
        for a, b, r in self.edges:
            if a == i:
                out[b] = r
            elif b == i:
                out[a] = r
        return out

    def coupling_matrix(self) -> np.ndarray:
        """Symmetric matrix of inter-zone conductances 1/R_ij (kW/degC)."""
        n = self.n_zones
        g = np.zeros((n, n))
        for i, j, r in self.edges:
            g[i, j] = g[j, i] = 1.0 / r
        return g

    def capacitances(self) -> np.ndarray:
        return np.array([z.capacitance for z in self.zones])

    def resistances_out(self) -> np.ndarray:
        return np.array([z.resistance_out for z in self.zones])

    def set_points(self) -> np.ndarray:
        return np.array([z.set_point for z in self.zones])

    def comfort_mins(self) -> np.ndarray:
        return np.array([z.comfort_min for z in self.zones])

    def comfort_maxs(self) -> np.ndarray:
        return np.array([z.comfort_max for z in self.zones])

    def flow_mins(self) -> np.ndarray:
        return np.array([z.flow_min for z in self.zones])

    def flow_maxs(self) -> np.ndarray:
        return np.array([z.flow_max for z in self.zones])

    def weights(self) -> np.ndarray:
        return np.array([z.weight for z in self.zones])


@dataclass(frozen=True)
class OperatingContext:
    """Mode, supply temperature, and the cost/limit constants of the AHU."""

    mode: Mode
    supply_temp: float        # T_s, degC (default; zones may override)
    specific_heat: float = 1.012   # c_a, kJ/kg/degC
    cop: float = 2.9               # coil coefficient of performance
    fan_coeff: float = 2.0         # s, kW/(kg/s)^3
    fan_bound: float = 1.0         # phi, kg/s
    energy_weight: float = 1.0     # w, p.u.
    total_flow_cap: float = 0.5    # m_bar, kg/s

    def __post_init__(self):
        if isinstance(self.mode, str):  # allow "cooling"/"heating" from config
            object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("specific_heat", "cop", "fan_coeff", "fan_bound", "total_flow_cap"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.energy_weight < 0:
            raise ConfigError(f"energy_weight must be >= 0, got {self.energy_weight}")
        if self.fan_bound < self.total_flow_cap:
            raise ConfigError(
                f"fan_bound ({self.fan_bound}) must be >= total_flow_cap "
                f"({self.total_flow_cap})"
            )

    @property
    def sign(self) -> float:
        return self.mode.sign


def supply_temps(net: BuildingNetwork, ctx: OperatingContext) -> np.ndarray:
    """Effective per-zone supply temperature (context default or zone override)."""
    return np.array(
        [z.supply_temp if z.supply_temp is not None else ctx.supply_temp for z in net.zones]
    )


def mode_signs(net: BuildingNetwork, ctx: OperatingContext) -> np.ndarray:
    """Per-zone mode sign: +1 where the zone cools, -1 where it heats.

    A zone without a supply override inherits the context mode and must have
    its whole comfort band on the correct side of the supply temperature.
    A zone with an override gets its sign from the side of its comfort band
    the override lies on (mixed-mode communities).
    """
    signs = np.empty(net.n_zones)
    for i, z in enumerate(net.zones):
        ts = z.supply_temp if z.supply_temp is not None else ctx.supply_temp
        if ts < z.comfort_min:
            s = 1.0
        elif ts > z.comfort_max:
            s = -1.0
        else:
            raise ConfigError(
                f"zone {i}: supply temp {ts} lies inside the comfort band "
                f"[{z.comfort_min}, {z.comfort_max}]; mode is ambiguous"
            )
        if z.supply_temp is None and s != ctx.sign:
            raise ConfigError(
                f"zone {i}: comfort band [{z.comfort_min}, {z.comfort_max}] is on the "
                f"wrong side of supply temp {ts} for {ctx.mode.value} mode"
            )
        signs[i] = s
    return signs


def validate_context(net: BuildingNetwork, ctx: OperatingContext) -> None:
    """Cross checks that need both the network and the context."""
    mode_signs(net, ctx)
    total_max = float(np.sum(net.flow_maxs()))
    if not ctx.total_flow_cap < total_max:
        raise ConfigError(
            f"total_flow_cap ({ctx.total_flow_cap}) must be < sum of zone flow_max "
            f"({total_max}), otherwise the cap is redundant"
        )


@dataclass
class ThermalState:
    """Zone temperatures (degC) at a clock time (seconds)."""

    temps: np.ndarray
    clock: float = 0.0

    def __post_init__(self):
        self.temps = np.asarray(self.temps, dtype=float)
        if not np.all(np.isfinite(self.temps)):
            raise ConfigError("temperatures must be finite")


@dataclass(frozen=True)
class AmbientSample:
    """Outdoor temperature (degC) and per-zone heat gains (kW) at one instant."""

    outdoor: float
    gains: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=float))
        if np.any(self.gains < 0):
            raise ConfigError(f"heat gains must be >= 0, got {self.gains}")


def _check_len(name: str, vec: np.ndarray, n: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (n,):
        raise DimensionMismatchError(name, n, int(vec.size))
    return vec


def rhs_full(
    net: BuildingNetwork,
    ctx: OperatingContext,
    state: ThermalState,
    flows: np.ndarray,
    amb: AmbientSample,
) -> np.ndarray:
    """dT/dt (degC/s) of the full coupled model."""
    n = net.n_zones
    temps = _check_len("temps", state.temps, n)
    flows = _check_len("flows", flows, n)
    gains = _check_len("gains", amb.gains, n)
    ts = supply_temps(net, ctx)
    g = net.coupling_matrix()
    power = (amb.outdoor - temps) / net.resistances_out()
    power += g @ temps - g.sum(axis=1) * temps
    power += ctx.specific_heat * flows * (ts - temps) + gains
    return power / net.capacitances()


def rhs_approx(
    net: BuildingNetwork,
    ctx: OperatingContext,
    state: ThermalState,
    flows: np.ndarray,
    amb: AmbientSample,
) -> np.ndarray:
    """dT/dt of the decoupled model (inter-zone heat transfer ignored)."""
    n = net.n_zones
    temps = _check_len("temps", state.temps, n)
    flows = _check_len("flows", flows, n)
    gains = _check_len("gains", amb.gains, n)
    ts = supply_temps(net, ctx)
    power = (amb.outdoor - temps) / net.resistances_out()
    power += ctx.specific_heat * flows * (ts - temps) + gains
    return power / net.capacitances()


@dataclass
class Trajectory:
    """Sampled temperature trajectory: times (s) and temps (n_samples x n_zones)."""

    times: np.ndarray
    temps: np.ndarray

    def state(self, k: int) -> ThermalState:
        return ThermalState(self.temps[k].copy(), float(self.times[k]))

    @property
    def final(self) -> ThermalState:
        return self.state(len(self.times) - 1)


def rk4_step(deriv, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical order-4 step of y' = deriv(t, y)."""
    k1 = deriv(t, y)
    k2 = deriv(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = deriv(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = deriv(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    net: BuildingNetwork,
    ctx: OperatingContext,
    ambient,
    flow_source,
    t_span: tuple[float, float],
    dt: float = 1.0,
    stride: int = 1,
    model: str = "full",
    initial: ThermalState | None = None,
) -> Trajectory:
    """Integrate the zone ODEs with fixed-step RK4 under exogenous inputs.

    ``ambient`` is an :class:`AmbientSample` (held constant) or a callable
    ``t -> AmbientSample``; ``flow_source`` is a flow vector or a callable
    ``t -> flows``.  Both are sampled once per step and held across the RK
    stages (zero-order hold).  The trajectory is sampled every ``stride``
    steps and always includes the final state.  Starts from the zone set
    points unless ``initial`` is given.  Deterministic for identical inputs.
    """
    if not dt > 0:
        raise ConfigError(f"dt must be > 0, got {dt}")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    if model not in ("full", "approx"):
        raise ConfigError(f"model must be 'full' or 'approx', got {model!r}")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ConfigError(f"empty t_span {t_span}")
    rhs = rhs_full if model == "full" else rhs_approx
    amb_at = ambient if callable(ambient) else (lambda _t: ambient)
    flow_at = flow_source if callable(flow_source) else (lambda _t: flow_source)

    n_steps = int(math.ceil((t1 - t0) / dt - 1e-12))
    if initial is None:
        y = net.set_points()
    else:
        y = np.asarray(initial.temps, dtype=float).copy()
        _check_len("initial temps", y, net.n_zones)
    times = [t0]
    samples = [y.copy()]
    t = t0
    for k in range(n_steps):
        step = min(dt, t1 - t)
        amb = amb_at(t)
        flows = np.asarray(flow_at(t), dtype=float)

        def deriv(tt, yy, amb=amb, flows=flows):
            return rhs(net, ctx, ThermalState(yy, tt), flows, amb)

        y = rk4_step(deriv, t, y, step)
        t = t + step
        if not np.all(np.isfinite(y)):
            bad = int(np.argmax(~np.isfinite(y)))
            raise NumericalBlowupError(t, bad, float(y[bad]))
        if (k + 1) % stride == 0 or k == n_steps - 1:
            times.append(t)
            samples.append(y.copy())
    return Trajectory(np.array(times), np.array(samples))


def steady_state_for_flows(
    net: BuildingNetwork,
    ctx: OperatingContext,
    amb: AmbientSample,
    flows: np.ndarray,
) -> np.ndarray:
    """Unique equilibrium temperatures for fixed flows and ambient.

    Solves the linear system obtained by zeroing the full-model right-hand
    side.  The system matrix is an irreducibly diagonally dominant M-matrix
    for valid parameters, so singularity signals corrupted input.
    """
    n = net.n_zones
    flows = _check_len("flows", flows, n)
    gains = _check_len("gains", amb.gains, n)
    ts = supply_temps(net, ctx)
    g = net.coupling_matrix()
    a = -g.copy()
    diag = 1.0 / net.resistances_out() + g.sum(axis=1) + ctx.specific_heat * flows
    a[np.diag_indices(n)] = diag
    b = amb.outdoor / net.resistances_out() + ctx.specific_heat * flows * ts + gains
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:  # cannot happen for valid parameters
        raise ConfigError(f"singular steady-state system (corrupted input): {exc}") from exc


def hurwitz_check(
    net: BuildingNetwork, ctx: OperatingContext, flows: np.ndarray
) -> tuple[bool, float]:
    """(is stable, spectral abscissa) of the state matrix for fixed flows."""
    n = net.n_zones
    flows = _check_len("flows", flows, n)
    g = net.coupling_matrix()
    a = g.copy()
    a[np.diag_indices(n)] = -(
        1.0 / net.resistances_out() + g.sum(axis=1) + ctx.specific_heat * flows
    )
    a = a / net.capacitances()[:, None]
    abscissa = float(np.max(np.real(np.linalg.eigvals(a))))
    return abscissa < 0.0, abscissa
