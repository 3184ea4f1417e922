"""g2flow: a numerical laboratory for cohomogeneity-one torsion-free G2-structure ODEs."""

from .errors import (
    BracketError,
    ClosureError,
    ConstraintError,
    ConvergenceError,
    DomainError,
    G2FlowError,
    NonAnalyticError,
    PositivityError,
    RegionExitError,
    ResonanceError,
    SeedError,
    StiffnessError,
)
from .invariants import (
    FullState,
    MetricCoeffs,
    Param,
    U1State,
    eval_F,
    eval_lambda,
    halfflat_from_metric,
    hamiltonian,
    lagrangian_density,
    mean_curvature,
    metric_from_halfflat,
    su2cubed_curve_residual,
    u1_from_full,
)
from .flow import (
    Budget,
    StopEvent,
    Trajectory,
    brandhuber_residual,
    integrate,
    reparametrize,
    rhs_full,
    rhs_u1,
)
from .params import ModelParams
from .classify import (
    ClassifyBudget,
    RatioMonitors,
    Verdict,
    chamber_membership,
    classify_trajectory,
    extract_alc_ell,
    monitor_ratios,
)
from .seeds import (
    NU0,
    NUINF,
    SeedSpec,
    SeriesSolution,
    cone_state,
    cs_linearization_eigen,
    seed_ac_end,
    seed_cs_end,
    seed_delta_su2,
    seed_kmn,
    seed_su2_factor,
    solve_singular_ivp,
)
from .shooter import (
    GammaCurve,
    ShootResult,
    closure_extract_beta,
    extend_ac_backward,
    find_beta_ac,
    find_c_ac,
    gamma_hit_test,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
