"""Steady-state comfort-vs-energy optimization problems and their auditors.

With the thermal network at equilibrium, choosing zone flows ``m`` fixes the
steady temperatures ``Z`` through the heat balance.  The coupled program
minimizes

    sum_i 0.5 r_i (Z_i - set_i)^2          (comfort)
  + (w/eta) sum_i c_a m_i |Z_i - T_s|      (coil energy)
  + w s (sum_i m_i)^3                      (fan energy)

subject to the steady heat balance, comfort boxes, flow boxes, and a total
flow cap.  Four views of it are handled here:

* ``full``    - coupled balance as an equality constraint (nonconvex as posed),
* ``approx``  - inter-zone transfer dropped, fan cube replaced by the separable
  upper bound 0.5 w s phi m_i^2,
* ``relaxed`` - the approx balance relaxed to "required flow <= m_i", which is
  convex and provably tight under the set-point condition checked by
  :func:`set_point_condition_check`,
* ``general`` - flows eliminated through the coupled balance, leaving a convex
  program in Z alone whenever the total-required-flow Hessian is PSD
  (:func:`flow_hessian_psd_check`).

Everything in this module evaluates; nothing solves.  Absolute values are
resolved once per zone by the mode sign, never by runtime branching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SupplyTempSingularityError
from .network import (
    AmbientSample,
    BuildingNetwork,
    OperatingContext,
    mode_signs,
    supply_temps,
    validate_context,
)

# Denominators c_a (Z - T_s) closer to zero than this are treated as singular.
DENOM_EPS = 1e-9

# Default audit tolerances (natural units).
FEAS_TOL = 1e-6
KKT_TOL = 1e-5
ZETA_TOL = 1e-6


@dataclass(frozen=True)
class ProblemInstance:
    """A network + operating context + frozen ambient, validated once.

    Construction rejects heating zones whose gains break convexity of the
    required-flow curve ((T_s - T_out)/R_i <= Q_i) and mixed-mode networks
    with inter-zone coupling.
    """

    net: BuildingNetwork
    ctx: OperatingContext
    ambient: AmbientSample

    def __post_init__(self):
        validate_context(self.net, self.ctx)
        n = self.net.n_zones
        if self.ambient.gains.shape != (n,):
            raise ConfigError(
                f"ambient gains length {self.ambient.gains.size} != zone count {n}"
            )
        signs = mode_signs(self.net, self.ctx)
        if self.net.edges and len(set(signs.tolist())) > 1:
            raise ConfigError("mixed cooling/heating zones require a decoupled network")
        # Heating convexity guard: required flow must be convex in Z.
        ts = supply_temps(self.net, self.ctx)
        r = self.net.resistances_out()
        for i in range(n):
            if signs[i] < 0 and (ts[i] - self.ambient.outdoor) / r[i] <= self.ambient.gains[i]:
                raise ConfigError(
                    f"zone {i}: heating with (T_s - T_out)/R = "
                    f"{(ts[i] - self.ambient.outdoor) / r[i]:.6g} <= gain "
                    f"{self.ambient.gains[i]:.6g} kW breaks convexity of the "
                    f"required-flow curve"
                )

    # Cached parameter arrays -------------------------------------------------

    @property
    def n(self) -> int:
        return self.net.n_zones

    @property
    def signs(self) -> np.ndarray:
        return mode_signs(self.net, self.ctx)

    @property
    def supply(self) -> np.ndarray:
        return supply_temps(self.net, self.ctx)


@dataclass
class DecisionPoint:
    """Candidate steady temperatures (degC) and flows (kg/s)."""

    temps: np.ndarray
    flows: np.ndarray

    def __post_init__(self):
        self.temps = np.asarray(self.temps, dtype=float)
        self.flows = np.asarray(self.flows, dtype=float)
        if not (np.all(np.isfinite(self.temps)) and np.all(np.isfinite(self.flows))):
            raise ConfigError("decision point must be finite")
        if self.temps.shape != self.flows.shape:
            raise ConfigError("temps and flows must have equal length")


@dataclass
class DualPoint:
    """Multipliers for the steady-state programs (all >= 0).

    ``flow_match`` pairs with the required-flow inequality of the relaxed
    problem and is ``None`` for the general (flow-eliminated) problem;
    ``temp_hi/lo`` with the comfort box, ``flow_hi/lo`` with the flow box,
    ``cap_price`` with the total-flow cap.
    """

    temp_hi: np.ndarray
    temp_lo: np.ndarray
    flow_hi: np.ndarray
    flow_lo: np.ndarray
    cap_price: float
    flow_match: np.ndarray | None = None

    def __post_init__(self):
        for name in ("temp_hi", "temp_lo", "flow_hi", "flow_lo"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.flow_match is not None:
            self.flow_match = np.asarray(self.flow_match, dtype=float)
        for name in ("temp_hi", "temp_lo", "flow_hi", "flow_lo", "flow_match"):
            v = getattr(self, name)
            if v is not None and np.any(v < 0):
                raise ConfigError(f"negative multiplier in {name}: {v}")
        if self.cap_price < 0:
            raise ConfigError(f"negative cap_price {self.cap_price}")

    @classmethod
    def zeros(cls, n: int, with_flow_match: bool = True) -> "DualPoint":
        z = np.zeros(n)
        return cls(z.copy(), z.copy(), z.copy(), z.copy(), 0.0,
                   z.copy() if with_flow_match else None)


@dataclass
class KktReport:
    """Residuals and active-set flags for an equilibrium candidate."""

    stationarity_residual: float
    complementarity_residual: float
    primal_violation: float
    tight: bool | None
    active_set: dict[str, np.ndarray | bool] = field(default_factory=dict)

    def __post_init__(self):
        for v in (self.stationarity_residual, self.complementarity_residual,
                  self.primal_violation):
            if v < 0:
                raise ConfigError("residuals must be >= 0")

    @property
    def max_residual(self) -> float:
        return max(self.stationarity_residual, self.complementarity_residual,
                   self.primal_violation)


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------

def objective_full(inst: ProblemInstance, pt: DecisionPoint) -> float:
    """Comfort + coil + cubic fan cost of the coupled problem."""
    net, ctx = inst.net, inst.ctx
    dz = pt.temps - net.set_points()
    comfort = 0.5 * float(np.sum(net.weights() * dz * dz))
    coil = (ctx.energy_weight / ctx.cop) * float(
        np.sum(ctx.specific_heat * pt.flows * inst.signs * (pt.temps - inst.supply))
    )
    fan = ctx.energy_weight * ctx.fan_coeff * float(np.sum(pt.flows)) ** 3
    return comfort + coil + fan


def objective_approx(inst: ProblemInstance, pt: DecisionPoint) -> float:
    """Separable objective with the quadratic fan-power upper bound."""
    net, ctx = inst.net, inst.ctx
    dz = pt.temps - net.set_points()
    comfort = 0.5 * float(np.sum(net.weights() * dz * dz))
    coil = (ctx.energy_weight / ctx.cop) * float(
        np.sum(ctx.specific_heat * pt.flows * inst.signs * (pt.temps - inst.supply))
    )
    fan = 0.5 * ctx.energy_weight * ctx.fan_coeff * ctx.fan_bound * float(
        np.sum(pt.flows**2)
    )
    return comfort + coil + fan


def strict_convexity_bound(ctx: OperatingContext) -> float:
    """Comfort weights must exceed w c_a^2 / (s phi eta^2) for strict convexity."""
    return ctx.energy_weight * ctx.specific_heat**2 / (
        ctx.fan_coeff * ctx.fan_bound * ctx.cop**2
    )


def strict_convexity_check(inst: ProblemInstance) -> bool:
    """True when every zone weight clears the strict-convexity bound."""
    return bool(np.all(inst.net.weights() > strict_convexity_bound(inst.ctx)))


# ---------------------------------------------------------------------------
# Required-flow functions
# ---------------------------------------------------------------------------

def _denoms(inst: ProblemInstance, temps: np.ndarray) -> np.ndarray:
    """c_a (Z - T_s) with the singularity guard (mode-signed positivity)."""
    gap = inst.signs * (temps - inst.supply)
    if np.any(gap <= DENOM_EPS):
        i = int(np.argmax(gap <= DENOM_EPS))
        raise SupplyTempSingularityError(i, float(temps[i]), float(inst.supply[i]))
    return inst.ctx.specific_heat * (temps - inst.supply)


def required_flow(inst: ProblemInstance, i: int, temp: float) -> float:
    """Decoupled flow needed to hold zone i at ``temp`` (ignores neighbours)."""
    return float(required_flows(inst, _scatter(inst, i, temp))[i])


def required_flow_slope(inst: ProblemInstance, i: int, temp: float) -> float:
    """d(required flow)/dZ for the decoupled balance of zone i."""
    return float(required_flow_slopes(inst, _scatter(inst, i, temp))[i])


def _scatter(inst: ProblemInstance, i: int, temp: float) -> np.ndarray:
    z = inst.net.set_points().astype(float)
    z[i] = temp
    return z


def required_flows(inst: ProblemInstance, temps: np.ndarray) -> np.ndarray:
    """Vector of decoupled required flows ((T_out - Z)/R + Q) / (c_a (Z - T_s))."""
    temps = np.asarray(temps, dtype=float)
    num = (inst.ambient.outdoor - temps) / inst.net.resistances_out() + inst.ambient.gains
    return num / _denoms(inst, temps)


def required_flow_slopes(inst: ProblemInstance, temps: np.ndarray) -> np.ndarray:
    """Elementwise derivative of :func:`required_flows` in each zone's own temp."""
    temps = np.asarray(temps, dtype=float)
    num = (inst.supply - inst.ambient.outdoor) / inst.net.resistances_out() - inst.ambient.gains
    den = _denoms(inst, temps)
    return num * inst.ctx.specific_heat / den**2


def coupled_required_flows(inst: ProblemInstance, temps: np.ndarray) -> np.ndarray:
    """Per-zone flows from the coupled heat balance at temperatures ``temps``."""
    temps = np.asarray(temps, dtype=float)
    g = inst.net.coupling_matrix()
    num = (inst.ambient.outdoor - temps) / inst.net.resistances_out()
    num += g @ temps - g.sum(axis=1) * temps
    num += inst.ambient.gains
    return num / _denoms(inst, temps)


def total_required_flow(inst: ProblemInstance, temps: np.ndarray) -> float:
    """Total flow the coupled balance demands at ``temps`` (the coupling sum)."""
    return float(np.sum(coupled_required_flows(inst, temps)))


def total_required_flow_gradient(inst: ProblemInstance, temps: np.ndarray) -> np.ndarray:
    """Closed-form gradient of :func:`total_required_flow`."""
    temps = np.asarray(temps, dtype=float)
    ca = inst.ctx.specific_heat
    den = _denoms(inst, temps)            # c_a (Z_i - T_s_i)
    g = inst.net.coupling_matrix()
    # own-flow term: ((T_s - T_out)/R + sum_j (T_s - Z_j)/R_ij - Q) / (c_a (Z - T_s)^2)
    own = (inst.supply - inst.ambient.outdoor) / inst.net.resistances_out()
    own += inst.supply * g.sum(axis=1) - g @ temps
    own -= inst.ambient.gains
    grad = own * ca / den**2
    # neighbour-flow term: sum_j (1/R_ij) / (c_a (Z_j - T_s_j))
    grad += g @ (1.0 / den)
    return grad


def total_required_flow_hessian(inst: ProblemInstance, temps: np.ndarray) -> np.ndarray:
    """Closed-form Hessian of :func:`total_required_flow`."""
    temps = np.asarray(temps, dtype=float)
    ca = inst.ctx.specific_heat
    den = _denoms(inst, temps)
    g = inst.net.coupling_matrix()
    own = (inst.supply - inst.ambient.outdoor) / inst.net.resistances_out()
    own += inst.supply * g.sum(axis=1) - g @ temps
    own -= inst.ambient.gains
    diag = -2.0 * own * ca**2 / den**3
    inv_den2 = 1.0 / den**2
    off = -g * ca * (inv_den2[:, None] + inv_den2[None, :])
    hess = off
    hess[np.diag_indices(inst.n)] = diag
    return hess


# ---------------------------------------------------------------------------
# Solvability validators
# ---------------------------------------------------------------------------

def set_point_condition_check(inst: ProblemInstance) -> np.ndarray:
    """Per-zone set-point condition that makes the convex relaxation tight.

    Cooling zones need their set point below the outdoor temperature (heating:
    above) and a required flow at the set point of at least the zone minimum.
    Zones that may switch off entirely (flow_min == 0, the community variant)
    only need a strictly positive required flow at the set point.
    """
    net = inst.net
    ok = np.empty(inst.n, dtype=bool)
    f_set = required_flows(inst, net.set_points())
    for i, z in enumerate(net.zones):
        if z.flow_min == 0.0:
            ok[i] = f_set[i] > 0.0
        else:
            temp_side = (
                z.set_point < inst.ambient.outdoor
                if inst.signs[i] > 0
                else z.set_point > inst.ambient.outdoor
            )
            ok[i] = temp_side and f_set[i] >= z.flow_min
    return ok


@dataclass
class HessianPsdReport:
    """Result of sampling the total-required-flow Hessian over a region."""

    psd: bool
    min_eigenvalue: float
    diag_dominant: bool
    min_dominance_margin: float


def flow_hessian_psd_check(
    inst: ProblemInstance, temp_samples: np.ndarray, eig_tol: float = -1e-9
) -> HessianPsdReport:
    """Check PSD-ness of the total-flow Hessian over sampled temperatures.

    ``temp_samples`` is (k, n_zones).  Also reports the diagonal-dominance
    sufficient condition, whose margin stays positive whenever neighbouring
    temperatures are close.
    """
    temp_samples = np.atleast_2d(np.asarray(temp_samples, dtype=float))
    min_eig = np.inf
    min_margin = np.inf
    for z in temp_samples:
        h = total_required_flow_hessian(inst, z)
        w = np.linalg.eigvalsh(h)
        min_eig = min(min_eig, float(w[0]))
        margin = np.abs(np.diag(h)) - (np.sum(np.abs(h), axis=1) - np.abs(np.diag(h)))
        min_margin = min(min_margin, float(np.min(margin)))
    return HessianPsdReport(
        psd=min_eig >= eig_tol,
        min_eigenvalue=min_eig,
        diag_dominant=min_margin >= 0.0,
        min_dominance_margin=min_margin,
    )


def comfort_box_grid(net: BuildingNetwork, points_per_axis: int) -> np.ndarray:
    """Full grid over the comfort box (only sensible for n <= 3 zones)."""
    axes = [
        np.linspace(z.comfort_min, z.comfort_max, points_per_axis) for z in net.zones
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def comfort_box_samples(
    net: BuildingNetwork, n_samples: int, seed: int = 0
) -> np.ndarray:
    """Corners-plus-random sample of the comfort box (works for any n)."""
    lo, hi = net.comfort_mins(), net.comfort_maxs()
    rng = np.random.default_rng(seed)
    pts = [lo, hi, net.set_points()]
    pts.extend(lo + rng.random((max(0, n_samples - 3), net.n_zones)) * (hi - lo))
    return np.array(pts)


# ---------------------------------------------------------------------------
# KKT auditors
# ---------------------------------------------------------------------------

def _active(slack: np.ndarray | float, tol: float) -> np.ndarray | bool:
    if np.ndim(slack) == 0:
        return bool(abs(slack) <= tol)
    return np.abs(slack) <= tol


def kkt_residual_relaxed(
    inst: ProblemInstance,
    pt: DecisionPoint,
    duals: DualPoint,
    tol: float = FEAS_TOL,
    zeta_tol: float = ZETA_TOL,
) -> KktReport:
    """Residuals of the relaxed problem's first-order optimality system.

    The ``tight`` verdict certifies the relaxation: every zone must carry a
    strictly positive required-flow multiplier or meet its required flow
    exactly.
    """
    if duals.flow_match is None:
        raise ConfigError("relaxed KKT audit needs flow_match multipliers")
    net, ctx = inst.net, inst.ctx
    z, m = pt.temps, pt.flows
    f = required_flows(inst, z)
    fp = required_flow_slopes(inst, z)
    w_eta_ca = ctx.energy_weight / ctx.cop * ctx.specific_heat

    stat_z = (
        net.weights() * (z - net.set_points())
        + inst.signs * w_eta_ca * m
        + duals.flow_match * fp
        + duals.temp_hi
        - duals.temp_lo
    )
    stat_m = (
        ctx.energy_weight * ctx.fan_coeff * ctx.fan_bound * m
        + inst.signs * w_eta_ca * (z - inst.supply)
        - duals.flow_match
        + duals.flow_hi
        - duals.flow_lo
        + duals.cap_price
    )
    stationarity = float(max(np.max(np.abs(stat_z)), np.max(np.abs(stat_m))))

    slacks = {
        "flow_match": f - m,
        "temp_hi": z - net.comfort_maxs(),
        "temp_lo": net.comfort_mins() - z,
        "flow_hi": m - net.flow_maxs(),
        "flow_lo": net.flow_mins() - m,
        "cap": float(np.sum(m) - ctx.total_flow_cap),
    }
    comp = [
        duals.flow_match * slacks["flow_match"],
        duals.temp_hi * slacks["temp_hi"],
        duals.temp_lo * slacks["temp_lo"],
        duals.flow_hi * slacks["flow_hi"],
        duals.flow_lo * slacks["flow_lo"],
        np.atleast_1d(duals.cap_price * slacks["cap"]),
    ]
    complementarity = float(max(np.max(np.abs(c)) for c in comp))
    primal = float(max(max(np.max(np.atleast_1d(s)) for s in slacks.values()), 0.0))
    tight = bool(
        np.all((duals.flow_match > zeta_tol) | (np.abs(f - m) <= tol))
    )
    active = {k: _active(v, tol) for k, v in slacks.items()}
    return KktReport(stationarity, complementarity, primal, tight, active)


def general_constraint_slacks(
    inst: ProblemInstance, temps: np.ndarray
) -> dict[str, np.ndarray | float]:
    """Signed slacks of the flow-eliminated problem's constraints at ``temps``.

    Flow bounds are expressed in the mode-signed linear form
    sigma * (balance numerator - bound * c_a (Z - T_s)), in kW, matching the
    gradients used in the stationarity audit.
    """
    temps = np.asarray(temps, dtype=float)
    net, ctx = inst.net, inst.ctx
    g = inst.net.coupling_matrix()
    num = (inst.ambient.outdoor - temps) / net.resistances_out()
    num += g @ temps - g.sum(axis=1) * temps
    num += inst.ambient.gains
    scale = ctx.specific_heat * (temps - inst.supply)
    return {
        "temp_hi": temps - net.comfort_maxs(),
        "temp_lo": net.comfort_mins() - temps,
        "flow_hi": inst.signs * (num - net.flow_maxs() * scale),
        "flow_lo": inst.signs * (net.flow_mins() * scale - num),
        "cap": float(np.sum(num / scale) - ctx.total_flow_cap),
    }


def kkt_residual_general(
    inst: ProblemInstance,
    pt: DecisionPoint,
    duals: DualPoint,
    tol: float = FEAS_TOL,
) -> KktReport:
    """Residuals of the flow-eliminated problem's optimality system.

    Stationarity is the gradient of its Lagrangian in the steady temperatures;
    there is no relaxation here, so no tightness verdict.
    """
    net, ctx = inst.net, inst.ctx
    z = np.asarray(pt.temps, dtype=float)
    g = inst.net.coupling_matrix()
    gsum = g.sum(axis=1)
    ca = ctx.specific_heat

    h = total_required_flow(inst, z)
    grad_h = total_required_flow_gradient(inst, z)
    price = 3.0 * ctx.energy_weight * ctx.fan_coeff * h**2 + duals.cap_price

    coef_hi = 1.0 / net.resistances_out() + gsum + net.flow_maxs() * ca
    coef_lo = 1.0 / net.resistances_out() + gsum + net.flow_mins() * ca
    stat = (
        net.weights() * (z - net.set_points())
        - inst.signs * ctx.energy_weight / (ctx.cop * net.resistances_out())
        + price * grad_h
        + duals.temp_hi
        - duals.temp_lo
        - inst.signs * (duals.flow_hi * coef_hi - g @ duals.flow_hi)
        + inst.signs * (duals.flow_lo * coef_lo - g @ duals.flow_lo)
    )
    stationarity = float(np.max(np.abs(stat)))

    slacks = general_constraint_slacks(inst, z)
    comp = [
        duals.temp_hi * slacks["temp_hi"],
        duals.temp_lo * slacks["temp_lo"],
        duals.flow_hi * slacks["flow_hi"],
        duals.flow_lo * slacks["flow_lo"],
        np.atleast_1d(duals.cap_price * slacks["cap"]),
    ]
    complementarity = float(max(np.max(np.abs(c)) for c in comp))
    primal = float(
        max(
            np.max(slacks["temp_hi"]), np.max(slacks["temp_lo"]),
            np.max(slacks["flow_hi"]), np.max(slacks["flow_lo"]),
            slacks["cap"], 0.0,
        )
    )
    active = {k: _active(v, tol) for k, v in slacks.items()}
    return KktReport(stationarity, complementarity, primal, None, active)


@dataclass
class FeasibilityReport:
    """Signed constraint slacks (<= 0 is satisfied) and the overall verdict."""

    slacks: dict[str, np.ndarray | float]
    feasible: bool
    max_violation: float


def feasibility_check(
    inst: ProblemInstance,
    pt: DecisionPoint,
    which: str = "full",
    tol: float = FEAS_TOL,
) -> FeasibilityReport:
    """Constraint slacks of one problem view at a candidate point.

    ``which`` selects the constraint set: "full" (coupled equality balance),
    "approx" (decoupled equality), "relaxed" (required flow <= m), or
    "general" (flow-eliminated; ``pt.flows`` is ignored).
    """
    net, ctx = inst.net, inst.ctx
    z, m = pt.temps, pt.flows
    slacks: dict[str, np.ndarray | float] = {}
    if which in ("full", "approx"):
        flows_needed = (
            coupled_required_flows(inst, z) if which == "full" else required_flows(inst, z)
        )
        # equality residual in flow units; both signs reported via abs
        slacks["balance"] = np.abs(m - flows_needed)
    elif which == "relaxed":
        slacks["flow_match"] = required_flows(inst, z) - m
    elif which == "general":
        slacks.update(general_constraint_slacks(inst, z))
    else:
        raise ConfigError(f"unknown problem view {which!r}")

    if which != "general":
        slacks["temp_hi"] = z - net.comfort_maxs()
        slacks["temp_lo"] = net.comfort_mins() - z
        slacks["flow_hi"] = m - net.flow_maxs()
        slacks["flow_lo"] = net.flow_mins() - m
        slacks["cap"] = float(np.sum(m) - ctx.total_flow_cap)

    worst = max(float(np.max(np.atleast_1d(v))) for v in slacks.values())
    return FeasibilityReport(slacks, worst <= tol, max(worst, 0.0))
