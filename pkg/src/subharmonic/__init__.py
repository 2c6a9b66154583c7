"""Subharmonic-oscillation stability analysis for PWM buck converters.

Closed-form critical conditions for common control schemes, an
independent series oracle, an exact switched time-domain simulator, and
cycle-map (sampled-data) eigenvalue analysis, plus a CSV-emitting CLI.
"""

from .config import RunConfig, SweepSpec, load_config, parse_sweep
from .errors import (
    ConfigError,
    DegenerateOrbit,
    Divergence,
    DomainError,
    MissingParameter,
    NoConvergence,
    NoRoot,
    NumericalFailure,
    SubharmonicError,
    UnsupportedStructure,
)
from .sampled import (
    CrossingEvent,
    PoleSet,
    PoleTrajectory,
    poincare_jacobian,
    pole_trajectory,
    poles,
)
from .schemes import (
    ACMC,
    CFPVR,
    CMC,
    PVMC,
    RLP,
    VMC3,
    BuckParams,
    ControlScheme,
    CriticalResult,
    LPlotCurve,
    acmc_gain,
    acmc_min_ramp,
    acmc_window_estimate,
    closed_form_lvalue,
    contour_data,
    critical_acmc,
    critical_cmc,
    critical_pvmc,
    critical_pvmc_noesr,
    critical_pvmc_smallR,
    critical_rlp,
    critical_vmc3,
    duty_ratio,
    loop_gain_hf,
    lplot,
    power_stage_il,
    power_stage_vo,
    rlp_critical_kp,
    rlp_steady_duty,
    solve_critical,
    v2_large_c_bound,
    v2_min_ramp,
    v2_no_ramp_feasible,
    v2_no_ramp_feasible_alt,
    v2_no_ramp_threshold,
    vmc3_gain,
)
from .simulation import (
    ClosedLoop,
    CycleEngine,
    DenseTrace,
    SimTrace,
    build_closed_loop,
    cycle_jacobian,
    ripple_check,
    simulate,
    steady_state,
    step_cycle,
)
from .tf import RationalTF
from .transform import (
    DutyCycle,
    NormalizedFreq,
    TableCase,
    alpha,
    alpha0,
    alpha1,
    correction_c,
    f_transform_case,
    f_transform_rational,
    f_transform_series,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateOrbit",
    "Divergence",
    "DomainError",
    "MissingParameter",
    "NoConvergence",
    "NoRoot",
    "NumericalFailure",
    "SubharmonicError",
    "UnsupportedStructure",
    "RationalTF",
    "DutyCycle",
    "NormalizedFreq",
    "TableCase",
    "alpha",
    "alpha0",
    "alpha1",
    "correction_c",
    "f_transform_case",
    "f_transform_rational",
    "f_transform_series",
    "BuckParams",
    "ControlScheme",
    "CriticalResult",
    "LPlotCurve",
    "CMC",
    "PVMC",
    "CFPVR",
    "ACMC",
    "VMC3",
    "RLP",
    "acmc_gain",
    "acmc_min_ramp",
    "acmc_window_estimate",
    "closed_form_lvalue",
    "contour_data",
    "critical_acmc",
    "critical_cmc",
    "critical_pvmc",
    "critical_pvmc_noesr",
    "critical_pvmc_smallR",
    "critical_rlp",
    "critical_vmc3",
    "duty_ratio",
    "loop_gain_hf",
    "lplot",
    "power_stage_il",
    "power_stage_vo",
    "rlp_critical_kp",
    "rlp_steady_duty",
    "solve_critical",
    "v2_large_c_bound",
    "v2_min_ramp",
    "v2_no_ramp_feasible",
    "v2_no_ramp_feasible_alt",
    "v2_no_ramp_threshold",
    "vmc3_gain",
    "ClosedLoop",
    "CycleEngine",
    "DenseTrace",
    "SimTrace",
    "build_closed_loop",
    "cycle_jacobian",
    "ripple_check",
    "simulate",
    "steady_state",
    "step_cycle",
    "PoleSet",
    "CrossingEvent",
    "PoleTrajectory",
    "poincare_jacobian",
    "pole_trajectory",
    "poles",
    "RunConfig",
    "SweepSpec",
    "load_config",
    "parse_sweep",
    "__version__",
]
