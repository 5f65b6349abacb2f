"""Method I: decentralized flow-rate controller for the decoupled problem.

Each zone runs saddle-point dynamics on its share of the relaxed problem's
Lagrangian using only local constants, its own temperature measurement (plus
a filtered derivative), and one scalar broadcast by the supply fan: the
total-flow-cap price.  The outdoor temperature and the indoor heat gain never
appear; the zone substitutes its own measured thermal balance for them, which
is exact along trajectories of the decoupled plant.

The fan integrates the cap price from the total flow it measures locally and
broadcasts the updated value each tick.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SupplyTempSingularityError
from .network import OperatingContext, ZoneParams
from .primal_dual import GainSet, projected_step, zone_sign_supply


@dataclass
class M1ZoneState:
    """One zone's controller state."""

    target_temp: float      # ancillary steady-temperature state, degC
    flow: float             # commanded flow, kg/s
    flow_match: float       # required-flow multiplier
    temp_hi: float          # comfort-ceiling multiplier
    temp_lo: float          # comfort-floor multiplier
    flow_hi: float          # flow-ceiling multiplier
    flow_lo: float          # flow-floor multiplier
    temp_filt: float        # dirty-derivative internal temperature estimate


@dataclass
class M1FanState:
    """Supply fan state: the broadcast total-flow-cap price."""

    cap_price: float = 0.0


def initial_zone_state(
    zone: ZoneParams, measured_temp: float, flow: float | None = None
) -> M1ZoneState:
    """Feasible unbiased start: target at the measurement, multipliers at zero."""
    return M1ZoneState(
        target_temp=measured_temp,
        flow=zone.flow_min if flow is None else flow,
        flow_match=0.0,
        temp_hi=0.0,
        temp_lo=0.0,
        flow_hi=0.0,
        flow_lo=0.0,
        temp_filt=measured_temp,
    )


def _step_core(
    zone: ZoneParams,
    ctx: OperatingContext,
    gains: GainSet,
    state: M1ZoneState,
    cap_price: float,
    dt: float,
    req_flow: float,
    req_slope: float,
    new_filt: float,
) -> M1ZoneState:
    """Shared update given the required-flow value/slope estimates at Z."""
    sgn, ts = zone_sign_supply(zone, ctx)
    z, m = state.target_temp, state.flow
    ctx_w = ctx.energy_weight
    w_eta_ca = ctx_w / ctx.cop * ctx.specific_heat

    # multipliers first: ascend their constraint slacks under projection
    flow_match = projected_step(
        state.flow_match, gains.flow_match * (req_flow - m), dt
    )
    temp_hi = projected_step(state.temp_hi, gains.temp_hi * (z - zone.comfort_max), dt)
    temp_lo = projected_step(state.temp_lo, gains.temp_lo * (zone.comfort_min - z), dt)
    flow_hi = projected_step(state.flow_hi, gains.flow_hi * (m - zone.flow_max), dt)
    flow_lo = projected_step(state.flow_lo, gains.flow_lo * (zone.flow_min - m), dt)

    # primal descent against the refreshed multipliers
    z_rate = gains.target_temp * (
        zone.weight * (zone.set_point - z)
        - sgn * w_eta_ca * m
        - flow_match * req_slope
        - temp_hi
        + temp_lo
    )
    m_rate = gains.flow * (
        -ctx_w * ctx.fan_coeff * ctx.fan_bound * m
        - sgn * w_eta_ca * (z - ts)
        + flow_match
        - flow_hi
        + flow_lo
        - cap_price
    )
    return M1ZoneState(
        target_temp=z + dt * z_rate,
        flow=m + dt * m_rate,
        flow_match=flow_match,
        temp_hi=temp_hi,
        temp_lo=temp_lo,
        flow_hi=flow_hi,
        flow_lo=flow_lo,
        temp_filt=new_filt,
    )


def zone_step_m1(
    zone: ZoneParams,
    ctx: OperatingContext,
    gains: GainSet,
    state: M1ZoneState,
    measured_temp: float,
    cap_price: float,
    dt: float,
    deriv_tau: float = 0.5,
) -> M1ZoneState:
    """One controller tick for a zone, from purely local information.

    The required-flow value and slope at the ancillary temperature are
    reconstructed from the measured temperature, its filtered derivative, and
    the current flow command; the rest is the saddle-point update.
    """
    sgn, ts = zone_sign_supply(zone, ctx)
    z, m = state.target_temp, state.flow
    gap = sgn * (z - ts)
    if gap <= 1e-9:
        raise SupplyTempSingularityError(None, z, ts)
    ca = ctx.specific_heat
    den = ca * (z - ts)

    tdot = (measured_temp - state.temp_filt) / deriv_tau
    new_filt = state.temp_filt + dt * tdot

    c_tdot = zone.capacitance * tdot
    req_flow = (
        (measured_temp - z) / zone.resistance_out
        + c_tdot
        + ca * m * (measured_temp - ts)
    ) / den
    req_slope = (
        (ts - measured_temp) / zone.resistance_out
        - c_tdot
        - ca * m * (measured_temp - ts)
    ) / (den * (z - ts))
    return _step_core(zone, ctx, gains, state, cap_price, dt, req_flow, req_slope, new_filt)


def zone_step_m1_raw(
    zone: ZoneParams,
    ctx: OperatingContext,
    gains: GainSet,
    state: M1ZoneState,
    ambient_outdoor: float,
    ambient_gain: float,
    cap_price: float,
    dt: float,
) -> M1ZoneState:
    """Disturbance-aware variant for unit tests with known outdoor/gain values.

    Evaluates the required-flow terms directly instead of through the measured
    substitution; the production controller never has access to these inputs.
    """
    sgn, ts = zone_sign_supply(zone, ctx)
    z = state.target_temp
    gap = sgn * (z - ts)
    if gap <= 1e-9:
        raise SupplyTempSingularityError(None, z, ts)
    ca = ctx.specific_heat
    den = ca * (z - ts)
    req_flow = ((ambient_outdoor - z) / zone.resistance_out + ambient_gain) / den
    req_slope = ((ts - ambient_outdoor) / zone.resistance_out - ambient_gain) / (
        den * (z - ts)
    )
    return _step_core(
        zone, ctx, gains, state, cap_price, dt, req_flow, req_slope, state.temp_filt
    )


def fan_step_m1(
    gains: GainSet,
    state: M1FanState,
    measured_total_flow: float,
    total_flow_cap: float,
    dt: float,
) -> M1FanState:
    """Fan tick: integrate the cap price from the measured total flow."""
    rate = gains.cap_price * (measured_total_flow - total_flow_cap)
    return M1FanState(cap_price=projected_step(state.cap_price, rate, dt))
