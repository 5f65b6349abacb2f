"""Method II: distributed flow-rate controller for the coupled problem.

Zones solve the flow-eliminated coupled program online.  Each zone updates
its ancillary temperature and four box multipliers from: its own temperature
measurement (with a filtered derivative), one message per graph neighbour
(the neighbour's measured and ancillary temperatures plus its two flow-box
multipliers), and a single scalar broadcast by the fan - the composite price
``3 w s h^2 + cap_price`` that prices total-flow changes.  Flow commands pass
through first-order low-pass dynamics to reject measurement noise.

The fan never sees zone temperatures: it reconstructs the total required flow
exactly from the reported flow commands and their (analytic) rates, advances
the cap price, and broadcasts the refreshed composite price.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ConfigError, SupplyTempSingularityError
from .network import BuildingNetwork, OperatingContext
from .primal_dual import GainSet, projected_step, zone_sign_supply


@dataclass
class M2ZoneState:
    """One zone's controller state (flow is a low-pass command)."""

    target_temp: float
    temp_hi: float
    temp_lo: float
    flow_hi: float
    flow_lo: float
    flow: float
    flow_dot: float         # analytic rate of the low-pass flow, kg/s^2
    temp_filt: float


@dataclass(frozen=True)
class NeighborMsg:
    """Per-tick message from a graph neighbour."""

    temp: float             # neighbour's measured temperature
    target_temp: float      # neighbour's ancillary temperature
    flow_hi: float          # neighbour's flow-ceiling multiplier
    flow_lo: float          # neighbour's flow-floor multiplier


@dataclass(frozen=True)
class FanBroadcast:
    """Composite price broadcast by the fan: 3 w s h_est^2 + cap_price."""

    price: float

    def __post_init__(self):
        if self.price < 0:
            raise ConfigError(f"broadcast price must be >= 0, got {self.price}")


@dataclass
class M2FanState:
    """Fan state: cap price and the reconstructed total required flow."""

    cap_price: float = 0.0
    flow_estimate: float = 0.0


def initial_zone_state(zone, measured_temp: float, flow: float | None = None) -> M2ZoneState:
    return M2ZoneState(
        target_temp=measured_temp,
        temp_hi=0.0,
        temp_lo=0.0,
        flow_hi=0.0,
        flow_lo=0.0,
        flow=zone.flow_min if flow is None else flow,
        flow_dot=0.0,
        temp_filt=measured_temp,
    )


def zone_step_m2(
    net: BuildingNetwork,
    zone_index: int,
    ctx: OperatingContext,
    gains: GainSet,
    state: M2ZoneState,
    measured_temp: float,
    msgs: Mapping[int, NeighborMsg],
    broadcast: FanBroadcast,
    dt: float,
    deriv_tau: float = 0.5,
) -> M2ZoneState:
    """One controller tick for a zone from local + neighbour information.

    The coupled balance numerator and the total-flow sensitivity are
    reconstructed without the outdoor temperature or the heat gain by
    substituting the zone's measured thermal balance; neighbour terms come
    from the messages.  A missing neighbour message is an error.
    """
    zone = net.zones[zone_index]
    neighbors = net.neighbors(zone_index)
    missing = sorted(set(neighbors) - set(msgs))
    if missing:
        raise ConfigError(f"zone {zone_index}: missing neighbour message(s) {missing}")
    sgn, ts = zone_sign_supply(zone, ctx)
    z, m = state.target_temp, state.flow
    gap = sgn * (z - ts)
    if gap <= 1e-9:
        raise SupplyTempSingularityError(zone_index, z, ts)
    ca = ctx.specific_heat
    den = ca * (z - ts)

    tdot = (measured_temp - state.temp_filt) / deriv_tau
    new_filt = state.temp_filt + dt * tdot
    c_tdot = zone.capacitance * tdot

    # coupled balance numerator, via the measured substitution
    num = (measured_temp - z) / zone.resistance_out + c_tdot
    num += ca * m * (measured_temp - ts)
    # own share of d(total flow)/dZ_i, same substitution
    own = (ts - measured_temp) / zone.resistance_out - c_tdot
    own -= ca * m * (measured_temp - ts)
    cross = 0.0
    g_sum = 0.0
    mu_hi_nbr = 0.0
    mu_lo_nbr = 0.0
    for j, r_ij in neighbors.items():
        msg = msgs[j]
        g_ij = 1.0 / r_ij
        g_sum += g_ij
        num += g_ij * (msg.target_temp - z - msg.temp + measured_temp)
        own += g_ij * (ts - msg.target_temp + msg.temp - measured_temp)
        sgn_j, ts_j = zone_sign_supply(net.zones[j], ctx)
        cross += g_ij / (ca * (msg.target_temp - ts_j))
        mu_hi_nbr += g_ij * msg.flow_hi
        mu_lo_nbr += g_ij * msg.flow_lo

    grad_total = own / (den * (z - ts)) + cross

    # multipliers first
    temp_hi = projected_step(state.temp_hi, gains.temp_hi * (z - zone.comfort_max), dt)
    temp_lo = projected_step(state.temp_lo, gains.temp_lo * (zone.comfort_min - z), dt)
    flow_hi = projected_step(
        state.flow_hi,
        gains.flow_hi * sgn * (num - zone.flow_max * ca * (z - ts)),
        dt,
    )
    flow_lo = projected_step(
        state.flow_lo,
        gains.flow_lo * sgn * (zone.flow_min * ca * (z - ts) - num),
        dt,
    )

    # primal descent with refreshed own multipliers (neighbour ones are the
    # previous tick's, carried by the messages)
    coef_hi = 1.0 / zone.resistance_out + g_sum + zone.flow_max * ca
    coef_lo = 1.0 / zone.resistance_out + g_sum + zone.flow_min * ca
    z_rate = gains.target_temp * (
        zone.weight * (zone.set_point - z)
        + sgn * (flow_hi * coef_hi - mu_hi_nbr)
        - sgn * (flow_lo * coef_lo - mu_lo_nbr)
        - temp_hi
        + temp_lo
        - grad_total * broadcast.price
        + sgn * ctx.energy_weight / (ctx.cop * zone.resistance_out)
    )

    flow_target = num / den
    m_rate = gains.flow * (flow_target - m)
    return M2ZoneState(
        target_temp=z + dt * z_rate,
        temp_hi=temp_hi,
        temp_lo=temp_lo,
        flow_hi=flow_hi,
        flow_lo=flow_lo,
        flow=m + dt * m_rate,
        flow_dot=m_rate,
        temp_filt=new_filt,
    )


def fan_step_m2(
    gains: GainSet,
    state: M2FanState,
    flow_reports: Iterable[tuple[float, float]],
    total_flow_cap: float,
    ctx: OperatingContext,
    dt: float,
) -> tuple[M2FanState, FanBroadcast]:
    """Fan tick: reconstruct total required flow, advance the price, broadcast.

    Each report is (flow, flow_rate).  Because every zone's flow command obeys
    first-order dynamics toward its required flow, rate/gain + flow recovers
    the zone's required flow exactly, so the sum is the network total.
    """
    h_est = 0.0
    for m, mdot in flow_reports:
        h_est += mdot / gains.flow + m
    rate = gains.cap_price * (h_est - total_flow_cap)
    cap_price = projected_step(state.cap_price, rate, dt)
    price = 3.0 * ctx.energy_weight * ctx.fan_coeff * h_est * h_est + cap_price
    return M2FanState(cap_price=cap_price, flow_estimate=h_est), FanBroadcast(price)


def low_pass_flow(current: float, target: float, gain: float, dt: float) -> float:
    """First-order step of the flow command toward its target."""
    if not (dt > 0 and gain > 0):
        raise ConfigError("dt and gain must be > 0")
    return current + dt * gain * (target - current)
