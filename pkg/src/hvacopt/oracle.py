"""Independent reference solvers for the steady-state programs.

Two solvers produce certified optima that validate controller equilibria:

* :func:`solve_relaxed` handles the separable relaxed problem by dual
  decomposition: a scalar bisection on the total-flow-cap multiplier wraps
  per-zone one-dimensional convex minimizations (the flow variable is
  eliminated in closed form, since every flow-dependent cost term is
  nondecreasing on the feasible flow range).
* :func:`solve_general` handles the flow-eliminated coupled problem with a
  trust-region interior solver followed by an active-set Newton polish that
  drives the first-order residuals to machine precision.

Both recover multipliers by nonnegative least squares on the stationarity
system restricted to the active constraints, and both grade themselves with
the auditors from :mod:`hvacopt.problems` - the math here is deliberately
written out again rather than shared with the controllers, so a controller
bug cannot certify itself.

A brute-force 2-zone grid scan (:func:`grid_search_2zone`) cross-checks both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize as sopt

from .errors import ConfigError, InfeasibleError
from .problems import (
    DecisionPoint,
    DualPoint,
    KktReport,
    ProblemInstance,
    coupled_required_flows,
    kkt_residual_general,
    kkt_residual_relaxed,
    strict_convexity_check,
)

ORACLE_TOL = 1e-7
_ACTIVE_TOL = 1e-7
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OracleResult:
    """Certified optimum candidate with its multipliers and KKT audit."""

    pt: DecisionPoint
    duals: DualPoint
    report: KktReport
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# Strictly feasible (Slater) probe
# ---------------------------------------------------------------------------

def slater_probe(inst: ProblemInstance, problem: str = "relaxed") -> np.ndarray:
    """Search for a strictly feasible temperature vector.

    Walks from the set points toward the comfort bound nearer the
    ambient-driven equilibrium (the direction that relieves flow demand) and
    returns the candidate with the largest strict-feasibility margin.  Raises
    :class:`InfeasibleError` when no strictly feasible point is found - the
    failure is reported, never guessed around.
    """
    net, ctx = inst.net, inst.ctx
    sets = net.set_points()
    # In cooling the no-flow equilibrium sits above the box, so relief is
    # toward comfort_max; in heating toward comfort_min.
    relief = np.where(inst.signs > 0, net.comfort_maxs(), net.comfort_mins())
    lo, hi = net.flow_mins(), net.flow_maxs()

    best_margin, best_z = -np.inf, None
    for t in np.linspace(0.02, 0.98, 49):
        z = sets + t * (relief - sets)
        try:
            if problem == "general":
                m = coupled_required_flows(inst, z)
            else:
                from .problems import required_flows

                m = required_flows(inst, z)
        except Exception:
            continue
        box_margin = min(
            float(np.min(z - net.comfort_mins())), float(np.min(net.comfort_maxs() - z))
        )
        if problem == "general":
            margin = min(
                box_margin,
                float(np.min(m - lo)),
                float(np.min(hi - m)),
                ctx.total_flow_cap - float(np.sum(m)),
            )
        else:
            # relaxed problem: m is free above the requirement, so pick the
            # smallest admissible flows and ask for slack everywhere
            m_pick = np.maximum(lo, m)
            margin = min(
                box_margin,
                float(np.min(hi - m_pick)),
                ctx.total_flow_cap - float(np.sum(m_pick)),
            )
        if margin > best_margin:
            best_margin, best_z = margin, z
    if best_z is None or best_margin <= 1e-9:
        raise InfeasibleError(
            f"no strictly feasible point found along the set-point probe "
            f"(best margin {best_margin:.3g}); Slater's condition appears to fail"
        )
    return best_z


# ---------------------------------------------------------------------------
# Relaxed problem: dual decomposition
# ---------------------------------------------------------------------------

def _bisect_scalar(fn, a: float, b: float, iters: int = 100) -> float:
    """Root of a monotone scalar function with fn(a) > 0 >= fn(b)."""
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if fn(mid) > 0:
            a = mid
        else:
            b = mid
    return b


def _zone_solve(inst: ProblemInstance, i: int, lam: float) -> tuple[float, float, int]:
    """Minimize one zone's share of the relaxed Lagrangian for a fixed cap price.

    Flow is eliminated: every flow cost (coil, fan, cap price) is
    nondecreasing in m, so the optimal flow is the smallest feasible one,
    max(flow_min, required_flow(Z)).  The remaining function of Z is convex;
    golden-section search nails it to ~1e-13 degC.  All formulas are local
    scalar math, independent of the evaluators being audited.
    """
    zone = inst.net.zones[i]
    ctx = inst.ctx
    sgn = inst.signs[i]
    ts = float(inst.supply[i])
    t_out = inst.ambient.outdoor
    q = float(inst.ambient.gains[i])
    res = zone.resistance_out
    ca = ctx.specific_heat
    w_eta_ca = ctx.energy_weight / ctx.cop * ca
    a_fan = ctx.energy_weight * ctx.fan_coeff * ctx.fan_bound

    def req(z: float) -> float:
        return ((t_out - z) / res + q) / (ca * (z - ts))

    def flow_at(z: float) -> float:
        return max(zone.flow_min, req(z))

    def cost(z: float) -> float:
        m = flow_at(z)
        return (
            0.5 * zone.weight * (z - zone.set_point) ** 2
            + w_eta_ca * m * sgn * (z - ts)
            + 0.5 * a_fan * m * m
            + lam * m
        )

    # comfort interval clipped to where the required flow fits under flow_max
    lo, hi = zone.comfort_min, zone.comfort_max
    fmax = zone.flow_max
    if sgn > 0:  # cooling: req decreasing in Z
        if req(hi) > fmax:
            raise InfeasibleError(
                f"zone {i}: required flow {req(hi):.4g} at the comfort maximum "
                f"exceeds flow_max {fmax}"
            )
        if req(lo) > fmax:
            lo = _bisect_scalar(lambda t: req(t) - fmax, lo, hi)
    else:  # heating: req increasing in Z
        if req(lo) > fmax:
            raise InfeasibleError(
                f"zone {i}: required flow {req(lo):.4g} at the comfort minimum "
                f"exceeds flow_max {fmax}"
            )
        if req(hi) > fmax:
            hi = _bisect_scalar(lambda t: req(t) - fmax, hi, lo)
    a, b = lo, hi
    evals = 0
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = cost(c), cost(d)
    for _ in range(90):
        evals += 1
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = cost(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = cost(d)
    z_star = 0.5 * (a + b)
    # snap to a domain endpoint when the interval has collapsed onto it
    if z_star - lo < 1e-11:
        z_star = lo
    elif hi - z_star < 1e-11:
        z_star = hi
    return z_star, flow_at(z_star), evals


def solve_relaxed(inst: ProblemInstance, tol: float = ORACLE_TOL) -> OracleResult:
    """Certified optimum of the relaxed separable problem.

    Dual decomposition on the total-flow cap: bisection on the scalar cap
    price, with closed-form flow elimination and a golden-section temperature
    search per zone.  Multipliers are recovered by nonnegative least squares
    on the active stationarity system and the result is audited with
    :func:`hvacopt.problems.kkt_residual_relaxed`.
    """
    if not strict_convexity_check(inst):
        raise ConfigError(
            "strict convexity requires every zone weight above "
            "w c_a^2/(s phi eta^2); refusing to solve"
        )
    slater_probe(inst, problem="relaxed")
    n = inst.n
    iterations = 0

    def primal(lam: float) -> tuple[np.ndarray, np.ndarray, int]:
        zs = np.empty(n)
        ms = np.empty(n)
        ev = 0
        for i in range(n):
            zs[i], ms[i], e = _zone_solve(inst, i, lam)
            ev += e
        return zs, ms, ev

    z0, m0, ev = primal(0.0)
    iterations += ev
    gap0 = float(np.sum(m0)) - inst.ctx.total_flow_cap
    if gap0 <= 0.0:
        lam_star, z_star, m_star = 0.0, z0, m0
    else:
        lam_hi = 1.0
        for _ in range(60):
            z1, m1, ev = primal(lam_hi)
            iterations += ev
            if float(np.sum(m1)) - inst.ctx.total_flow_cap <= 0.0:
                break
            lam_hi *= 2.0
        else:
            raise InfeasibleError("total-flow cap unreachable at any finite cap price")
        lam_lo = 0.0
        for _ in range(100):
            mid = 0.5 * (lam_lo + lam_hi)
            zm, mm, ev = primal(mid)
            iterations += ev
            if float(np.sum(mm)) - inst.ctx.total_flow_cap > 0.0:
                lam_lo = mid
            else:
                lam_hi = mid
        lam_star = lam_hi
        z_star, m_star, ev = primal(lam_star)
        iterations += ev

    duals = _recover_duals_relaxed(inst, z_star, m_star, lam_star)
    pt = DecisionPoint(z_star, m_star)
    report = kkt_residual_relaxed(inst, pt, duals)
    converged = report.max_residual <= tol
    return OracleResult(pt, duals, report, iterations, converged)


def _recover_duals_relaxed(
    inst: ProblemInstance, z: np.ndarray, m: np.ndarray, lam: float
) -> DualPoint:
    """Nonnegative least-squares multipliers for the relaxed stationarity system."""
    from .problems import required_flow_slopes, required_flows

    net, ctx = inst.net, inst.ctx
    n = inst.n
    f = required_flows(inst, z)
    fp = required_flow_slopes(inst, z)
    w_eta_ca = ctx.energy_weight / ctx.cop * ctx.specific_heat
    d_z = net.weights() * (z - net.set_points()) + inst.signs * w_eta_ca * m
    d_m = (
        ctx.energy_weight * ctx.fan_coeff * ctx.fan_bound * m
        + inst.signs * w_eta_ca * (z - inst.supply)
        + lam
    )

    act = {
        "flow_match": np.abs(f - m) <= 1e-8,
        "temp_hi": np.abs(z - net.comfort_maxs()) <= 1e-8,
        "temp_lo": np.abs(z - net.comfort_mins()) <= 1e-8,
        "flow_hi": np.abs(m - net.flow_maxs()) <= 1e-8,
        "flow_lo": np.abs(m - net.flow_mins()) <= 1e-8,
    }
    cols = []
    labels = []
    for i in range(n):
        if act["flow_match"][i]:
            col = np.zeros(2 * n)
            col[i] = fp[i]
            col[n + i] = -1.0
            cols.append(col)
            labels.append(("flow_match", i))
        for name, sign_ in (("temp_hi", 1.0), ("temp_lo", -1.0)):
            if act[name][i]:
                col = np.zeros(2 * n)
                col[i] = sign_
                cols.append(col)
                labels.append((name, i))
        for name, sign_ in (("flow_hi", 1.0), ("flow_lo", -1.0)):
            if act[name][i]:
                col = np.zeros(2 * n)
                col[n + i] = sign_
                cols.append(col)
                labels.append((name, i))

    duals = DualPoint.zeros(n)
    duals.cap_price = lam
    if cols:
        a = np.stack(cols, axis=1)
        b = -np.concatenate([d_z, d_m])
        x, _ = sopt.nnls(a, b)
        for val, (name, i) in zip(x, labels):
            getattr(duals, name)[i] = val
    return duals


# ---------------------------------------------------------------------------
# General (flow-eliminated) problem
# ---------------------------------------------------------------------------

class _GeneralProblem:
    """Objective/constraint bundle for the flow-eliminated program.

    All calculus is written out locally (own gradient code) so the oracle
    stays independent of the controller implementations.
    """

    def __init__(self, inst: ProblemInstance):
        if len(set(inst.signs.tolist())) > 1:
            raise ConfigError("general solver requires a uniform operating mode")
        self.inst = inst
        net, ctx = inst.net, inst.ctx
        self.sgn = float(inst.signs[0])
        self.n = inst.n
        self.r = net.weights()
        self.sets = net.set_points()
        self.res = net.resistances_out()
        self.g = net.coupling_matrix()
        self.gsum = self.g.sum(axis=1)
        self.ca = ctx.specific_heat
        self.ts = inst.supply
        self.q = inst.ambient.gains
        self.t_out = inst.ambient.outdoor
        self.w = ctx.energy_weight
        self.s_fan = ctx.fan_coeff
        self.eta = ctx.cop
        # linear balance numerator num(Z) = b0 + B Z
        self.B = self.g - np.diag(1.0 / self.res + self.gsum)
        self.b0 = self.t_out / self.res + self.q

    # flows and their calculus ------------------------------------------------

    def num(self, z: np.ndarray) -> np.ndarray:
        return self.b0 + self.B @ z

    def den(self, z: np.ndarray) -> np.ndarray:
        return self.ca * (z - self.ts)

    def flows(self, z: np.ndarray) -> np.ndarray:
        return self.num(z) / self.den(z)

    def h(self, z: np.ndarray) -> float:
        return float(np.sum(self.flows(z)))

    def h_grad(self, z: np.ndarray) -> np.ndarray:
        den = self.den(z)
        own = (self.ts - self.t_out) / self.res + self.ts * self.gsum - self.g @ z - self.q
        return own * self.ca / den**2 + self.g @ (1.0 / den)

    def h_hess(self, z: np.ndarray) -> np.ndarray:
        den = self.den(z)
        own = (self.ts - self.t_out) / self.res + self.ts * self.gsum - self.g @ z - self.q
        inv2 = 1.0 / den**2
        hess = -self.g * self.ca * (inv2[:, None] + inv2[None, :])
        hess[np.diag_indices(self.n)] = -2.0 * own * self.ca**2 / den**3
        return hess

    # objective ---------------------------------------------------------------

    def f(self, z: np.ndarray) -> float:
        comfort = 0.5 * float(np.sum(self.r * (z - self.sets) ** 2))
        coil = self.w / self.eta * self.sgn * float(
            np.sum((self.t_out - z) / self.res + self.q)
        )
        return comfort + coil + self.w * self.s_fan * self.h(z) ** 3

    def f_grad(self, z: np.ndarray) -> np.ndarray:
        return (
            self.r * (z - self.sets)
            - self.sgn * self.w / (self.eta * self.res)
            + 3.0 * self.w * self.s_fan * self.h(z) ** 2 * self.h_grad(z)
        )

    def f_hess(self, z: np.ndarray) -> np.ndarray:
        hv = self.h(z)
        hg = self.h_grad(z)
        return (
            np.diag(self.r)
            + 3.0 * self.w * self.s_fan * (2.0 * hv * np.outer(hg, hg) + hv**2 * self.h_hess(z))
        )

    # constraints (all written as g(Z) <= 0) ----------------------------------

    def linear_rows(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows for sigma(num - m_max ca (Z-Ts)) and sigma(m_min ca (Z-Ts) - num)."""
        net = self.inst.net
        a_hi = self.sgn * (self.B - np.diag(net.flow_maxs() * self.ca))
        c_hi = self.sgn * (self.b0 + net.flow_maxs() * self.ca * self.ts)
        a_lo = self.sgn * (np.diag(net.flow_mins() * self.ca) - self.B)
        c_lo = self.sgn * (-net.flow_mins() * self.ca * self.ts - self.b0)
        return np.vstack([a_hi, a_lo]), np.concatenate([c_hi, c_lo])


def solve_general(inst: ProblemInstance, tol: float = ORACLE_TOL) -> OracleResult:
    """Certified optimum of the flow-eliminated coupled problem.

    Interior trust-region minimization with analytic derivatives, then an
    active-set Newton polish on the first-order system, then nonnegative
    least-squares multiplier recovery and a
    :func:`hvacopt.problems.kkt_residual_general` audit.  Flows are recovered
    from the coupled heat balance.
    """
    from .problems import flow_hessian_psd_check, comfort_box_samples

    prob = _GeneralProblem(inst)
    psd = flow_hessian_psd_check(inst, comfort_box_samples(inst.net, 64, seed=11))
    if not psd.psd:
        raise ConfigError(
            f"total-flow Hessian is not PSD over the comfort box "
            f"(min eigenvalue {psd.min_eigenvalue:.3g}); problem is not certifiably convex"
        )
    z0 = slater_probe(inst, problem="general")

    net, ctx = inst.net, inst.ctx
    a_rows, c_rows = prob.linear_rows()
    lin = sopt.LinearConstraint(a_rows, -np.inf, -c_rows)
    nonlin = sopt.NonlinearConstraint(
        prob.h, -np.inf, ctx.total_flow_cap,
        jac=lambda z: prob.h_grad(z)[None, :],
        hess=lambda z, v: float(v[0]) * prob.h_hess(z),
    )
    bounds = sopt.Bounds(net.comfort_mins(), net.comfort_maxs())
    res = sopt.minimize(
        prob.f,
        z0,
        jac=prob.f_grad,
        hess=prob.f_hess,
        method="trust-constr",
        bounds=bounds,
        constraints=[lin, nonlin],
        options={"gtol": 1e-10, "xtol": 1e-14, "maxiter": 2000, "verbose": 0},
    )
    z = np.clip(res.x, net.comfort_mins(), net.comfort_maxs())
    iterations = int(res.niter)

    try:
        z, duals, polish_iters = _polish_general(prob, z)
        iterations += polish_iters
    except (np.linalg.LinAlgError, InfeasibleError):
        duals = _recover_duals_general(prob, z)

    m = coupled_required_flows(inst, z)
    pt = DecisionPoint(z, m)
    report = kkt_residual_general(inst, pt, duals)
    converged = report.max_residual <= tol
    return OracleResult(pt, duals, report, iterations, converged)


def _general_constraints(prob: _GeneralProblem):
    """List of (value, grad, hess) closures for every inequality, fixed order."""
    net = prob.inst.net
    a_rows, c_rows = prob.linear_rows()
    cons = []
    n = prob.n
    for i in range(n):  # temp_hi
        cons.append((
            lambda z, i=i: z[i] - net.comfort_maxs()[i],
            lambda z, i=i: _unit(n, i),
            None,
        ))
    for i in range(n):  # temp_lo
        cons.append((
            lambda z, i=i: net.comfort_mins()[i] - z[i],
            lambda z, i=i: -_unit(n, i),
            None,
        ))
    for k in range(2 * n):  # flow_hi rows then flow_lo rows
        cons.append((
            lambda z, k=k: float(a_rows[k] @ z + c_rows[k]),
            lambda z, k=k: a_rows[k],
            None,
        ))
    cons.append((
        lambda z: prob.h(z) - prob.inst.ctx.total_flow_cap,
        prob.h_grad,
        prob.h_hess,
    ))
    return cons


def _unit(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def _polish_general(
    prob: _GeneralProblem, z0: np.ndarray, max_outer: int = 15
) -> tuple[np.ndarray, DualPoint, int]:
    """Active-set Newton refinement of a near-optimal point.

    Treats near-active constraints as equalities, solves the equality KKT
    system by Newton iteration, drops constraints with negative multipliers,
    re-adds violated ones, and stops when the first-order residual is at
    machine level.
    """
    cons = _general_constraints(prob)
    z = z0.copy()
    active = {j for j, (val, _, _) in enumerate(cons) if val(z) >= -_ACTIVE_TOL}
    total_iters = 0

    for _ in range(max_outer):
        idx = sorted(active)
        k = len(idx)
        d = np.zeros(k)
        for _ in range(40):
            total_iters += 1
            grad = prob.f_grad(z)
            rows = [cons[j][1](z) for j in idx]
            gmat = np.stack(rows, axis=0) if k else np.zeros((0, prob.n))
            r1 = grad + (gmat.T @ d if k else 0.0)
            r2 = np.array([cons[j][0](z) for j in idx])
            resid = np.concatenate([r1, r2]) if k else r1
            if float(np.max(np.abs(resid))) < 1e-13:
                break
            hess = prob.f_hess(z)
            for jj, j in enumerate(idx):
                if cons[j][2] is not None:
                    hess = hess + d[jj] * cons[j][2](z)
            kkt = np.zeros((prob.n + k, prob.n + k))
            kkt[: prob.n, : prob.n] = hess
            if k:
                kkt[: prob.n, prob.n:] = gmat.T
                kkt[prob.n:, : prob.n] = gmat
            step = np.linalg.solve(kkt, -resid)
            z = z + step[: prob.n]
            d = d + step[prob.n:]
        # active-set updates
        if k and float(np.min(d)) < -1e-9:
            active.remove(idx[int(np.argmin(d))])
            continue
        violated = [
            j for j, (val, _, _) in enumerate(cons)
            if j not in active and val(z) > 1e-10
        ]
        if violated:
            worst = max(violated, key=lambda j: cons[j][0](z))
            active.add(worst)
            continue
        d = np.maximum(d, 0.0)
        return z, _duals_from_active(prob.n, idx, d), total_iters
    raise InfeasibleError("active-set polish did not settle")


def _duals_from_active(n: int, idx: list[int], d: np.ndarray) -> DualPoint:
    duals = DualPoint.zeros(n, with_flow_match=False)
    for val, j in zip(d, idx):
        if j < n:
            duals.temp_hi[j] = val
        elif j < 2 * n:
            duals.temp_lo[j - n] = val
        elif j < 3 * n:
            duals.flow_hi[j - 2 * n] = val
        elif j < 4 * n:
            duals.flow_lo[j - 3 * n] = val
        else:
            duals.cap_price = float(val)
    return duals


def _recover_duals_general(prob: _GeneralProblem, z: np.ndarray) -> DualPoint:
    """NNLS fallback multiplier recovery at a fixed primal point."""
    cons = _general_constraints(prob)
    idx = [j for j, (val, _, _) in enumerate(cons) if val(z) >= -_ACTIVE_TOL]
    if not idx:
        return DualPoint.zeros(prob.n, with_flow_match=False)
    a = np.stack([cons[j][1](z) for j in idx], axis=1)
    b = -prob.f_grad(z)
    x, _ = sopt.nnls(a, b)
    return _duals_from_active(prob.n, idx, x)


# ---------------------------------------------------------------------------
# Brute force
# ---------------------------------------------------------------------------

def _grid_flows(inst: ProblemInstance, z1, z2, problem: str):
    net = inst.net
    ca = inst.ctx.specific_heat
    ts = inst.supply
    q = inst.ambient.gains
    t_out = inst.ambient.outdoor
    r = net.resistances_out()
    if problem == "general":
        g12 = net.coupling_matrix()[0, 1]
        num1 = (t_out - z1) / r[0] + g12 * (z2 - z1) + q[0]
        num2 = (t_out - z2) / r[1] + g12 * (z1 - z2) + q[1]
    else:
        num1 = (t_out - z1) / r[0] + q[0]
        num2 = (t_out - z2) / r[1] + q[1]
    return num1 / (ca * (z1 - ts[0])), num2 / (ca * (z2 - ts[1]))


def grid_search_2zone(
    inst: ProblemInstance,
    resolution: int = 400,
    problem: str = "general",
    objective=None,
) -> DecisionPoint:
    """Exhaustive temperature scan over the comfort box of a 2-zone instance.

    Flows come from the heat balance ("general": coupled; "approx":
    decoupled), infeasible grid points are discarded, and the best point under
    the matching objective (or a caller-supplied ``objective(z1, z2, m1, m2)``)
    is returned.
    """
    if inst.n != 2:
        raise ConfigError("grid_search_2zone needs exactly 2 zones")
    if resolution < 3:
        raise ConfigError(f"resolution must be >= 3 per axis, got {resolution}")
    net, ctx = inst.net, inst.ctx
    z1_axis = np.linspace(net.zones[0].comfort_min, net.zones[0].comfort_max, resolution)
    z2_axis = np.linspace(net.zones[1].comfort_min, net.zones[1].comfort_max, resolution)
    z1, z2 = np.meshgrid(z1_axis, z2_axis, indexing="ij")
    m1, m2 = _grid_flows(inst, z1, z2, problem)
    lo, hi = net.flow_mins(), net.flow_maxs()
    feasible = (
        (m1 >= lo[0]) & (m1 <= hi[0]) & (m2 >= lo[1]) & (m2 <= hi[1])
        & (m1 + m2 <= ctx.total_flow_cap)
    )
    if not feasible.any():
        raise InfeasibleError("no feasible grid point")
    if objective is None:
        w, eta, ca = ctx.energy_weight, ctx.cop, ctx.specific_heat
        rts = inst.supply
        sg = inst.signs
        sets = net.set_points()
        wts = net.weights()
        comfort = 0.5 * wts[0] * (z1 - sets[0]) ** 2 + 0.5 * wts[1] * (z2 - sets[1]) ** 2
        coil = (w / eta) * ca * (
            m1 * sg[0] * (z1 - rts[0]) + m2 * sg[1] * (z2 - rts[1])
        )
        if problem == "general":
            fan = w * ctx.fan_coeff * (m1 + m2) ** 3
        else:
            fan = 0.5 * w * ctx.fan_coeff * ctx.fan_bound * (m1**2 + m2**2)
        cost = comfort + coil + fan
    else:
        cost = objective(z1, z2, m1, m2)
    cost = np.where(feasible, cost, np.inf)
    k = int(np.argmin(cost))
    i, j = np.unravel_index(k, cost.shape)
    return DecisionPoint(
        np.array([z1_axis[i], z2_axis[j]]),
        np.array([float(m1[i, j]), float(m2[i, j])]),
    )


def feasible_region_2zone(
    inst: ProblemInstance,
    resolution: int = 200,
    box: tuple[float, float, float, float] | None = None,
    cap: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean feasibility mask of the coupled 2-zone constraint set.

    ``box`` is (z1_min, z1_max, z2_min, z2_max); defaults to the comfort box.
    ``cap`` overrides the context total-flow cap, which is how the nested
    constraint-set pictures at different caps are produced.
    """
    if inst.n != 2:
        raise ConfigError("feasible_region_2zone needs exactly 2 zones")
    net, ctx = inst.net, inst.ctx
    if box is None:
        box = (
            net.zones[0].comfort_min, net.zones[0].comfort_max,
            net.zones[1].comfort_min, net.zones[1].comfort_max,
        )
    cap = ctx.total_flow_cap if cap is None else cap
    z1_axis = np.linspace(box[0], box[1], resolution)
    z2_axis = np.linspace(box[2], box[3], resolution)
    z1, z2 = np.meshgrid(z1_axis, z2_axis, indexing="ij")
    m1, m2 = _grid_flows(inst, z1, z2, "general")
    lo, hi = net.flow_mins(), net.flow_maxs()
    mask = (
        (m1 >= lo[0]) & (m1 <= hi[0]) & (m2 >= lo[1]) & (m2 <= hi[1])
        & (m1 + m2 <= cap)
    )
    return z1_axis, z2_axis, mask
