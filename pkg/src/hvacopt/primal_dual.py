"""Shared pieces of the online primal-dual controllers.

Both control methods integrate saddle-point dynamics: primal states descend a
Lagrangian while multipliers ascend it under a positive projection that keeps
them in the nonnegative orthant.  The discrete stepping updates each zone's
multipliers first and then its primal states from the refreshed multipliers
(a within-zone Gauss-Seidel sweep); for the weakly damped oscillatory modes
of these dynamics that ordering is stable at practical step sizes where the
simultaneous update is not.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError
from .network import OperatingContext, ZoneParams


def pos_project(value: float, state_var: float) -> float:
    """Positive projection of a rate onto a nonnegative state variable.

    Returns ``value`` when the state is strictly positive and
    ``max(0, value)`` on the boundary, so the flow never pushes the state
    negative.  A negative state is an invariant breach and raises.
    """
    if state_var < 0:
        raise ConfigError(f"positive projection on negative state {state_var}")
    if state_var > 0:
        return value
    return value if value > 0.0 else 0.0


def projected_step(state_var: float, rate: float, dt: float) -> float:
    """Euler step of a projected multiplier, clamped onto the orthant."""
    out = state_var + dt * pos_project(rate, state_var)
    return out if out > 0.0 else 0.0


@dataclass(frozen=True)
class GainSet:
    """Per-second controller gains, one per dynamic state."""

    target_temp: float = 0.067   # ancillary temperature
    flow: float = 1.0            # flow command / low-pass flow
    flow_match: float = 1.0      # required-flow multiplier (method I only)
    temp_hi: float = 1.0
    temp_lo: float = 1.0
    flow_hi: float = 1.0
    flow_lo: float = 1.0
    cap_price: float = 1.0       # total-flow-cap multiplier (fan side)

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"gain {f.name} must be > 0")


class DirtyDerivative:
    """Causal filtered differentiator: rate = (sample - smoothed) / tau.

    The internal state tracks the input with time constant ``tau``; the
    output converges to the true slope of a ramp and decays to zero on a
    constant input.
    """

    def __init__(self, tau: float = 10.0, initial: float | None = None):
        if not tau > 0:
            raise ConfigError(f"tau must be > 0, got {tau}")
        self.tau = tau
        self.smoothed = initial

    def update(self, sample: float, dt: float) -> float:
        if not dt > 0:
            raise ConfigError(f"dt must be > 0, got {dt}")
        if self.smoothed is None:
            self.smoothed = sample
        rate = (sample - self.smoothed) / self.tau
        self.smoothed += dt * rate
        return rate


def zone_sign_supply(zone: ZoneParams, ctx: OperatingContext) -> tuple[float, float]:
    """(mode sign, effective supply temp) for one zone, honouring overrides."""
    ts = zone.supply_temp if zone.supply_temp is not None else ctx.supply_temp
    if ts < zone.comfort_min:
        return 1.0, ts
    if ts > zone.comfort_max:
        return -1.0, ts
    raise ConfigError(
        f"supply temp {ts} inside comfort band [{zone.comfort_min}, {zone.comfort_max}]"
    )
