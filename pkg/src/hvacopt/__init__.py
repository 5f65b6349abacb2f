"""Building thermal-network simulation and online HVAC flow-rate optimization.

The package couples an RC zone-graph thermal model with two real-time
primal-dual flow controllers (a decentralized one for the decoupled problem
and a distributed one for the coupled problem), an independent convex oracle
that certifies their equilibria through KKT audits, and a scenario-driven
closed-loop simulation harness with CSV/figure reporting.
"""

from .errors import (
    ConfigError,
    DimensionMismatchError,
    HvacOptError,
    InfeasibleError,
    NonStationaryWindowError,
    NumericalBlowupError,
    SupplyTempSingularityError,
)
from .network import (
    AmbientSample,
    BuildingNetwork,
    Mode,
    OperatingContext,
    ThermalState,
    Trajectory,
    ZoneParams,
    hurwitz_check,
    integrate,
    mode_signs,
    rhs_approx,
    rhs_full,
    steady_state_for_flows,
    supply_temps,
)
from .problems import (
    DecisionPoint,
    DualPoint,
    FeasibilityReport,
    KktReport,
    ProblemInstance,
    set_point_condition_check,
    flow_hessian_psd_check,
    coupled_required_flows,
    feasibility_check,
    kkt_residual_general,
    kkt_residual_relaxed,
    objective_approx,
    objective_full,
    required_flow,
    required_flow_slope,
    required_flows,
    strict_convexity_bound,
    strict_convexity_check,
    total_required_flow,
    total_required_flow_gradient,
    total_required_flow_hessian,
)
from .oracle import (
    OracleResult,
    feasible_region_2zone,
    grid_search_2zone,
    solve_general,
    solve_relaxed,
)
from .primal_dual import DirtyDerivative, GainSet, pos_project
from .method1 import (
    M1FanState,
    M1ZoneState,
    fan_step_m1,
    zone_step_m1,
    zone_step_m1_raw,
)
from .method2 import (
    FanBroadcast,
    M2FanState,
    M2ZoneState,
    NeighborMsg,
    fan_step_m2,
    low_pass_flow,
    zone_step_m2,
)
from .schedule import DisturbanceSchedule
from .scenario import (
    ParameterEvent,
    Scenario,
    check_scenario,
    load_bundled,
    load_scenario,
)
from .simulate import RunArtifact, TrajectoryTable, read_table_csv, run, write_table_csv
from .audit import AuditResult, audit_window, report, sweep

__version__ = "0.1.0"
