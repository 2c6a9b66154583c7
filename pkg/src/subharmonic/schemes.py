"""Converter parameters, control schemes, and closed-form critical conditions.

Each control scheme has a high-frequency loop-gain approximation whose
F-transform gives a closed-form stability number L; the subharmonic
boundary is L = 1 and L < 1 is the stable side.  The formulas here are
algebraic in the kernel functions of ``transform``; the series oracle and
the switched simulator provide independent cross-checks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import bisect, brentq

from .errors import DomainError, MissingParameter, NoRoot
from .tf import RationalTF
from .transform import alpha, alpha0, alpha1

__all__ = [
    "BuckParams",
    "CMC",
    "PVMC",
    "CFPVR",
    "ACMC",
    "VMC3",
    "RLP",
    "ControlScheme",
    "CriticalResult",
    "LPlotCurve",
    "power_stage_vo",
    "power_stage_il",
    "loop_gain_hf",
    "closed_form_lvalue",
    "duty_ratio",
    "critical_cmc",
    "critical_pvmc",
    "critical_pvmc_noesr",
    "critical_pvmc_smallR",
    "v2_min_ramp",
    "v2_large_c_bound",
    "v2_no_ramp_threshold",
    "v2_no_ramp_feasible",
    "v2_no_ramp_feasible_alt",
    "critical_rlp",
    "rlp_steady_duty",
    "rlp_critical_kp",
    "critical_acmc",
    "acmc_gain",
    "acmc_min_ramp",
    "acmc_window_estimate",
    "critical_vmc3",
    "vmc3_gain",
    "lplot",
    "contour_data",
    "solve_critical",
]


# ---------------------------------------------------------------------------
# Parameter records.


@dataclass(frozen=True)
class BuckParams:
    """Power-stage and modulator constants of a buck converter.

    v_s: source voltage; v_r: reference; V_l/V_h: ramp valley and peak;
    f_s: switching frequency; L: inductance; R: load; R_c: capacitor ESR;
    C: output capacitance (None for the plain RL plant).
    """

    v_s: float
    v_r: float
    V_l: float
    V_h: float
    f_s: float
    L: float
    R: float
    C: Optional[float] = None
    R_c: float = 0.0

    def __post_init__(self):
        if not self.v_s > 0.0:
            raise DomainError("v_s must be positive")
        if not self.f_s > 0.0:
            raise DomainError("f_s must be positive")
        if not self.L > 0.0:
            raise DomainError("L must be positive")
        if not self.R > 0.0:
            raise DomainError("R must be positive")
        if self.R_c < 0.0:
            raise DomainError("R_c must be nonnegative")
        if self.C is not None and not self.C > 0.0:
            raise DomainError("C must be positive when present")
        # V_h == V_l (zero ramp amplitude) is allowed: it models m_a = 0
        if self.V_h < self.V_l:
            raise DomainError("V_h must not be below V_l")

    @property
    def V_m(self) -> float:
        return self.V_h - self.V_l

    @property
    def T(self) -> float:
        return 1.0 / self.f_s

    @property
    def omega_s(self) -> float:
        return 2.0 * math.pi * self.f_s

    @property
    def rho(self) -> float:
        return self.R / (self.R + self.R_c)

    @property
    def ramp_slope(self) -> float:
        """m_a = V_m / T."""
        return self.V_m * self.f_s

    def require_C(self) -> float:
        if self.C is None:
            raise MissingParameter("this scheme needs the output capacitance C")
        return self.C


def _positive(name, value):
    if not value > 0.0:
        raise DomainError(f"{name} must be positive")


@dataclass(frozen=True)
class CMC:
    """Peak current-mode control: y = i_c - i_L with unit current gain."""


@dataclass(frozen=True)
class PVMC:
    """Proportional voltage-mode control, y = k_p (v_r - v_o)."""

    k_p: float

    def __post_init__(self):
        _positive("k_p", self.k_p)


@dataclass(frozen=True)
class CFPVR:
    """Constant-frequency peak voltage regulator (V^2); same critical
    condition as PVMC."""

    k_p: float

    def __post_init__(self):
        _positive("k_p", self.k_p)


@dataclass(frozen=True)
class ACMC:
    """Average current-mode control with a type-II current compensator."""

    R_s: float
    K_c: float
    z_c: float
    omega_p: float

    def __post_init__(self):
        _positive("R_s", self.R_s)
        _positive("K_c", self.K_c)
        _positive("z_c", self.z_c)
        _positive("omega_p", self.omega_p)


@dataclass(frozen=True)
class VMC3:
    """Voltage-mode control with a type-III three-pole-two-zero compensator."""

    K_c: float
    kappa_z: float
    omega_p: float

    def __post_init__(self):
        _positive("K_c", self.K_c)
        _positive("omega_p", self.omega_p)
        if not 0.0 < self.kappa_z <= 2.0:
            raise DomainError("kappa_z must lie in (0, 2]")


@dataclass(frozen=True)
class RLP:
    """Proportional feedback around a first-order RL plant."""

    k_p: float

    def __post_init__(self):
        _positive("k_p", self.k_p)


ControlScheme = Union[CMC, PVMC, CFPVR, ACMC, VMC3, RLP]


@dataclass(frozen=True)
class CriticalResult:
    """Stability number L plus an optionally solved critical parameter."""

    lvalue: float
    critical_value: Optional[float] = None

    @property
    def stable(self) -> bool:
        return self.lvalue < 1.0


def _check_zc(params: BuckParams, scheme: ACMC) -> None:
    if scheme.z_c >= params.omega_s / 2.0:
        warnings.warn(
            "compensator zero z_c is not small against the switching "
            "frequency; the high-frequency approximation degrades",
            stacklevel=3,
        )


def _require_vm(params: BuckParams) -> float:
    if params.V_m <= 0.0:
        raise DomainError("zero ramp amplitude: V_m must be positive here")
    return params.V_m


# ---------------------------------------------------------------------------
# Power stage.


def power_stage_vo(params: BuckParams) -> RationalTF:
    """v_d-to-v_o transfer function (1 + s R_c C) over the LC denominator."""
    C = params.require_C()
    quad = (params.L / params.R + params.R_c * C, params.L * C / params.rho)
    zeros = [1.0 / (params.R_c * C)] if params.R_c > 0.0 else []
    return RationalTF(1.0, zeros=zeros, quad_poles=[quad])


def power_stage_il(params: BuckParams) -> RationalTF:
    """v_d-to-i_L transfer function; DC gain 1/R, high-frequency 1/(L s)."""
    C = params.require_C()
    quad = (params.L / params.R + params.R_c * C, params.L * C / params.rho)
    return RationalTF(
        1.0 / params.R, zeros=[params.rho / (params.R * C)], quad_poles=[quad]
    )


# ---------------------------------------------------------------------------
# High-frequency loop gains.


def loop_gain_hf(params: BuckParams, scheme: ControlScheme) -> RationalTF:
    """The scheme's high-frequency loop-gain approximation T(s).

    These are the shapes whose F-transforms reproduce the closed-form
    critical conditions; ``closed_form_lvalue`` is their exact partner.
    """
    V_m = _require_vm(params)
    if isinstance(scheme, CMC):
        return RationalTF(params.v_s / (params.L * V_m), integrators=1)
    if isinstance(scheme, (PVMC, CFPVR)):
        C = params.require_C()
        if params.R_c > 0.0:
            scale = params.v_s * scheme.k_p * params.rho / (V_m * params.L * C)
            return RationalTF(scale, zeros=[1.0 / (params.R_c * C)], integrators=2)
        # with no ESR zero the load pole at 1/RC is the next relevant feature
        scale = params.v_s * scheme.k_p * params.R / (V_m * params.L)
        return RationalTF(scale, poles=[1.0 / (params.R * C)], integrators=1)
    if isinstance(scheme, RLP):
        return RationalTF(
            params.v_s * scheme.k_p / V_m, poles=[params.R / params.L]
        )
    if isinstance(scheme, ACMC):
        _check_zc(params, scheme)
        scale = params.v_s * scheme.R_s * scheme.K_c / (V_m * scheme.z_c * params.L)
        return RationalTF(scale, poles=[scheme.omega_p], integrators=1)
    if isinstance(scheme, VMC3):
        scale = params.v_s * scheme.K_c * params.rho / (V_m * scheme.kappa_z)
        return RationalTF(scale, poles=[scheme.omega_p], integrators=1)
    raise MissingParameter(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Closed-form critical conditions, scheme by scheme.


def critical_cmc(params: BuckParams, D) -> float:
    """Ramp slope on the subharmonic boundary: (v_s/L)(D - 1/2).

    The loop is free of subharmonic oscillation iff m_a exceeds this;
    negative values (D < 1/2) mean no ramp is needed.
    """
    D = np.asarray(D, dtype=float)
    if np.any(D < 0.0) or np.any(D > 1.0):
        raise DomainError("duty cycle must lie in [0, 1]")
    out = (params.v_s / params.L) * (D - 0.5)
    return float(out) if out.ndim == 0 else out


def critical_pvmc(params: BuckParams, k_p: float, D) -> CriticalResult:
    """PVMC/V^2 stability number with ESR included.

    L = (v_s k_p rho T^2 / 4 V_m L C) [ (2 R_c C / T)(2D-1) + (2D^2-2D+1) ].
    """
    C = params.require_C()
    V_m = _require_vm(params)
    D = float(D)
    lead = params.v_s * k_p * params.rho * params.T**2 / (4.0 * V_m * params.L * C)
    bracket = (2.0 * params.R_c * C / params.T) * (2.0 * D - 1.0) + (
        2.0 * D * D - 2.0 * D + 1.0
    )
    return CriticalResult(lvalue=lead * bracket)


def critical_pvmc_noesr(params: BuckParams, k_p: float, D) -> CriticalResult:
    """Zero-ESR special case, L = (v_s k_p T^2 / 4 V_m L C)(2D^2 - 2D + 1)."""
    if params.R_c != 0.0:
        raise DomainError("this form requires R_c = 0")
    C = params.require_C()
    V_m = _require_vm(params)
    D = float(D)
    lval = (
        params.v_s
        * k_p
        * params.T**2
        / (4.0 * V_m * params.L * C)
        * (2.0 * D * D - 2.0 * D + 1.0)
    )
    return CriticalResult(lvalue=lval)


def v2_min_ramp(params: BuckParams, k_p: float, D: float) -> float:
    """Minimum stabilizing ramp slope for PVMC/V^2.

    Algebraically identical to rearranging the critical condition of
    ``critical_pvmc`` for m_a = V_m/T:

        m_a = (v_s k_p rho / L) [ R_c (2D-1)/2 + (T/4C)(2D^2-2D+1) ].
    """
    C = params.require_C()
    D = float(D)
    if D == 0.0:
        raise DomainError("D = 0 is outside the validity of the ramp bound")
    if not 0.0 < D < 1.0:
        raise DomainError("duty cycle must lie in (0, 1)")
    return (params.v_s * k_p * params.rho / params.L) * (
        params.R_c * (2.0 * D - 1.0) / 2.0
        + (params.T / (4.0 * C)) * (2.0 * D * D - 2.0 * D + 1.0)
    )


def v2_large_c_bound(params: BuckParams, D: float) -> float:
    """Large-capacitor limit of the ramp bound, (2D-1) v_s R_c / 2L."""
    return (2.0 * float(D) - 1.0) * params.v_s * params.R_c / (2.0 * params.L)


def v2_no_ramp_threshold(D: float) -> float:
    """Feasibility boundary for running without a ramp: the smallest
    R_c C / T that tolerates m_a = 0 at duty D.  Defined for D < 1/2."""
    D = float(D)
    if not 0.0 <= D < 0.5:
        raise DomainError("the no-ramp boundary exists only for D < 1/2")
    return 0.5 + D * D / (1.0 - 2.0 * D)


def v2_no_ramp_feasible(params: BuckParams, D: float) -> bool:
    """Is m_a = 0 free of subharmonic oscillation?

    Requires D < 1/2 and R_c C / T > 1/2 + D^2/(1 - 2D).
    """
    C = params.require_C()
    D = float(D)
    if not D < 0.5:
        return False
    if params.R_c == 0.0:
        return False
    return params.R_c * C / params.T > v2_no_ramp_threshold(D)


def v2_no_ramp_feasible_alt(params: BuckParams, D: float) -> bool:
    """Equivalent form of the no-ramp test, T/(R_c C) < 1/(1/2 + D^2/(1-2D))."""
    C = params.require_C()
    D = float(D)
    if params.R_c == 0.0 or D == 0.5:
        return False
    denom = 0.5 + D * D / (1.0 - 2.0 * D)
    return params.T / (params.R_c * C) < 1.0 / denom


def critical_pvmc_smallR(params: BuckParams, k_p: float, D) -> float:
    """Critical source voltage for the no-ESR, heavy-load case.

    With the load pole p = 1/(R C omega_s):
        v_s = L V_m omega_s / (R k_p (alpha0(D) - alpha(D, p))).
    """
    if params.R_c != 0.0:
        raise DomainError("this form requires R_c = 0")
    C = params.require_C()
    V_m = _require_vm(params)
    p = 1.0 / (params.R * C * params.omega_s)
    gap = alpha0(D) - alpha(D, p)
    if gap <= 0.0:
        raise DomainError(
            "alpha0 - alpha is not positive here; no finite critical v_s"
        )
    return params.L * V_m * params.omega_s / (params.R * k_p * gap)


# -- RL plant with proportional feedback ------------------------------------


def _rl_peak_current(params: BuckParams, d: float) -> float:
    """Peak inductor current of the exact periodic RL solution at duty d."""
    tau = params.L / params.R
    a = -math.expm1(-d * params.T / tau)
    b = -math.expm1(-params.T / tau)
    return params.v_s / params.R * a / b


def rlp_steady_duty(params: BuckParams, k_p: float) -> float:
    """Steady-state duty from the modulator equation of the RL loop.

    Solves k_p (v_r - R i_peak(d)) = V_l + V_m d on (0, 1) using the exact
    periodic RL solution; returns 0 or 1 when the loop saturates.
    """

    def g(d):
        return (
            k_p * (params.v_r - params.R * _rl_peak_current(params, d))
            - params.V_l
            - params.V_m * d
        )

    if g(0.0) <= 0.0:
        return 0.0
    if g(1.0) >= 0.0:
        return 1.0
    return brentq(g, 0.0, 1.0, xtol=1e-15, rtol=8.9e-16)


def critical_rlp(params: BuckParams, k_p: float, D=None) -> CriticalResult:
    """Stability number of the RL loop, L = v_s k_p p alpha(D, p) / V_m.

    D defaults to the steady-state duty at this gain.
    """
    V_m = _require_vm(params)
    if D is None:
        D = rlp_steady_duty(params, k_p)
    p = params.R / (params.L * params.omega_s)
    return CriticalResult(lvalue=params.v_s * k_p * p * alpha(float(D), p) / V_m)


def rlp_critical_kp(
    params: BuckParams, k_min: float = 0.1, k_max: float = 100.0
) -> Tuple[float, float]:
    """Critical proportional gain of the RL loop and its duty cycle.

    The steady-state duty is pinned by the regulation limit of the
    modulator: the peak of the standard linear current ripple reaches the
    command v_r / R,

        v_s d + v_s d (1 - d) T R / (2 L) = v_r,

    whose smaller quadratic root lies in (0, 1) whenever v_r < v_s.  The
    critical condition v_s k_p p alpha(d, p) = V_m is then solved for k_p
    by bisection over [k_min, k_max].  Returns (k_p, d).

    The gain/duty pair is razor-sensitive to the duty convention: using
    the exact exponential ripple instead shifts the duty by 2e-4 and the
    gain by 0.09, landing on the exact switching threshold rather than
    the closed-form figure this routine targets.
    """
    V_m = _require_vm(params)
    p = params.R / (params.L * params.omega_s)
    half_ripple = params.v_s * params.T * params.R / (2.0 * params.L)
    a = half_ripple
    b = params.v_s + half_ripple
    disc = b * b - 4.0 * a * params.v_r
    if disc < 0.0 or not params.v_r < params.v_s:
        raise NoRoot("the ripple peak never reaches the current command")
    d = (b - math.sqrt(disc)) / (2.0 * a)
    if not 0.0 < d < 1.0:
        raise NoRoot("steady-state duty falls outside (0, 1)")
    gain = params.v_s * p * alpha(d, p) / V_m

    def g(kp):
        return kp * gain - 1.0

    if gain <= 0.0 or g(k_min) > 0.0 or g(k_max) < 0.0:
        raise NoRoot(
            f"no critical gain in [{k_min}, {k_max}] at steady duty {d:.4f}"
        )
    kp = bisect(g, k_min, k_max, rtol=1e-13)
    return kp, d


# -- Average current-mode control -------------------------------------------


def acmc_gain(params: BuckParams, scheme: ACMC) -> float:
    """Combined dimensionless gain K = v_s R_s K_c / (V_m z_c L omega_s)."""
    V_m = _require_vm(params)
    return (
        params.v_s
        * scheme.R_s
        * scheme.K_c
        / (V_m * scheme.z_c * params.L * params.omega_s)
    )


def critical_acmc(params: BuckParams, scheme: ACMC, D) -> CriticalResult:
    """ACMC stability number L = K (alpha0(D) - alpha(D, p)), p = omega_p/omega_s.

    critical_value carries the critical source voltage when the kernel gap
    is positive (otherwise no finite positive v_s exists and it is None).
    """
    _check_zc(params, scheme)
    D = float(D)
    p = scheme.omega_p / params.omega_s
    gap = alpha0(D) - alpha(D, p)
    K = acmc_gain(params, scheme)
    crit_vs = None
    if gap > 0.0:
        crit_vs = (
            _require_vm(params)
            * scheme.z_c
            * params.L
            * params.omega_s
            / (scheme.R_s * scheme.K_c * gap)
        )
    return CriticalResult(lvalue=K * gap, critical_value=crit_vs)


def acmc_min_ramp(params: BuckParams, scheme: ACMC, D) -> float:
    """Minimum ramp slope, m_a = (v_s R_s K_c / 2 pi z_c L)(alpha0 - alpha)."""
    D = float(D)
    p = scheme.omega_p / params.omega_s
    gap = alpha0(D) - alpha(D, p)
    return (
        params.v_s
        * scheme.R_s
        * scheme.K_c
        / (2.0 * math.pi * scheme.z_c * params.L)
        * gap
    )


def acmc_window_estimate(K: float, D) -> Tuple[float, float]:
    """Estimated instability window of p for a combined gain K.

    Returns (1/(K alpha1(D)), 1/2 + (2D - 1 + 2e^{-pi D} - 1/(K pi)) /
    (4 pi D e^{-pi D})); the window is empty when p_low >= p_high.  The
    underlying approximations target K near 1 and mid-range D, so a
    warning is issued outside that neighbourhood.
    """
    if not K > 0.0:
        raise DomainError("K must be positive")
    D = float(D)
    if not 0.0 < D < 1.0:
        raise DomainError("D must lie in (0, 1)")
    if K < 1.0 / math.pi or not 0.1 <= D <= 0.7:
        warnings.warn(
            "window estimate used outside its nominal validity "
            "(K near 1, D in [0.1, 0.7]); treat the endpoints as rough",
            stacklevel=2,
        )
    p_low = 1.0 / (K * alpha1(D))
    e = math.exp(-math.pi * D)
    p_high = 0.5 + (2.0 * D - 1.0 + 2.0 * e - 1.0 / (K * math.pi)) / (
        4.0 * math.pi * D * e
    )
    return p_low, p_high


# -- Voltage-mode control with a type-III compensator -----------------------


def vmc3_gain(params: BuckParams, scheme: VMC3) -> float:
    """Combined dimensionless gain K = v_s K_c rho / (V_m kappa_z omega_s)."""
    V_m = _require_vm(params)
    return (
        params.v_s
        * scheme.K_c
        * params.rho
        / (V_m * scheme.kappa_z * params.omega_s)
    )


def critical_vmc3(params: BuckParams, scheme: VMC3, D) -> CriticalResult:
    """Type-III VMC critical source voltage.

    v_s = V_m kappa_z omega_s / (K_c rho (alpha0(D) - alpha(D, p))) with
    p = omega_p / omega_s; lvalue is K (alpha0 - alpha) at the present v_s.
    """
    D = float(D)
    p = scheme.omega_p / params.omega_s
    gap = alpha0(D) - alpha(D, p)
    if gap <= 0.0:
        raise DomainError(
            "alpha0 - alpha is not positive here; no finite critical v_s"
        )
    V_m = _require_vm(params)
    crit_vs = (
        V_m * scheme.kappa_z * params.omega_s / (scheme.K_c * params.rho * gap)
    )
    return CriticalResult(lvalue=vmc3_gain(params, scheme) * gap, critical_value=crit_vs)


# ---------------------------------------------------------------------------
# Steady-state duty and the unified stability number.


def duty_ratio(params: BuckParams, scheme: ControlScheme) -> float:
    """Nominal steady-state duty cycle implied by the references.

    Uses the ideal DC relation v_o = D v_s with the scheme's regulation
    target (v_o -> v_r for voltage loops, i_L -> reference for current
    loops); the RL loop, having no integrator, solves its exact modulator
    equation instead.
    """
    if isinstance(scheme, (PVMC, VMC3)):
        D = params.v_r / params.v_s
    elif isinstance(scheme, CFPVR):
        # the divider k_p v_o is regulated to v_r
        D = params.v_r / (scheme.k_p * params.v_s)
    elif isinstance(scheme, ACMC):
        D = params.v_r * params.R / (scheme.R_s * params.v_s)
    elif isinstance(scheme, CMC):
        # v_r doubles as the current command i_c
        D = params.v_r * params.R / params.v_s
    elif isinstance(scheme, RLP):
        D = rlp_steady_duty(params, scheme.k_p)
    else:
        raise MissingParameter(f"unknown scheme {scheme!r}")
    if not 0.0 < D < 1.0:
        raise DomainError(f"operating duty {D:.4g} falls outside (0, 1)")
    return float(D)


def closed_form_lvalue(
    params: BuckParams,
    scheme: ControlScheme,
    D,
    p_override: Optional[float] = None,
) -> float:
    """Scheme's stability number L at duty D.

    p_override replaces the normalized compensator pole for ACMC/VMC3
    sweeps.  For CMC with zero ramp amplitude the boundary D = 1/2 is
    reported through the renormalized number L = 2D, which crosses 1
    exactly where the ramp-slope condition becomes violated.
    """
    D = float(D)
    if isinstance(scheme, CMC):
        if params.V_m == 0.0:
            return 2.0 * D
        return critical_cmc(params, D) * params.T / params.V_m
    if isinstance(scheme, (PVMC, CFPVR)):
        if p_override is not None:
            raise DomainError("p sweeps apply only to ACMC/VMC3 loops")
        return critical_pvmc(params, scheme.k_p, D).lvalue
    if isinstance(scheme, RLP):
        if p_override is not None:
            raise DomainError("p sweeps apply only to ACMC/VMC3 loops")
        return critical_rlp(params, scheme.k_p, D).lvalue
    if isinstance(scheme, ACMC):
        p = scheme.omega_p / params.omega_s if p_override is None else p_override
        return acmc_gain(params, scheme) * (alpha0(D) - alpha(D, p))
    if isinstance(scheme, VMC3):
        p = scheme.omega_p / params.omega_s if p_override is None else p_override
        return vmc3_gain(params, scheme) * (alpha0(D) - alpha(D, p))
    raise MissingParameter(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Parameter sweeps: L-plots, contours, crossings.


@dataclass(frozen=True)
class LPlotCurve:
    """L evaluated along one swept variable, with all L = 1 crossings."""

    variable: str
    grid: np.ndarray
    lvalues: np.ndarray
    crossings: Tuple[float, ...]


_SWEEPABLE = ("D", "p", "v_s", "k_p")


def _lvalue_at(params, scheme, variable, x, duty):
    if variable == "D":
        return closed_form_lvalue(params, scheme, x)
    if variable == "p":
        if duty is None:
            duty = duty_ratio(params, scheme)
        return closed_form_lvalue(params, scheme, duty, p_override=x)
    if variable == "v_s":
        pr = replace(params, v_s=x)
        d = duty if duty is not None else duty_ratio(pr, scheme)
        return closed_form_lvalue(pr, scheme, d)
    if variable == "k_p":
        if not isinstance(scheme, (PVMC, CFPVR, RLP)):
            raise DomainError("k_p sweeps need a proportional-gain scheme")
        sch = replace(scheme, k_p=x)
        d = duty if duty is not None else duty_ratio(params, sch)
        return closed_form_lvalue(params, sch, d)
    raise DomainError(f"sweep variable must be one of {_SWEEPABLE}")


def lplot(
    params: BuckParams,
    scheme: ControlScheme,
    variable: str,
    grid: Sequence[float],
    duty: Optional[float] = None,
) -> LPlotCurve:
    """Evaluate L along a grid of one variable and locate all L = 1 crossings.

    The grid must be non-empty and strictly monotone.  Crossings between
    adjacent grid points are refined by bisection on the underlying closed
    form to a relative tolerance of 1e-9.  ``duty`` pins the duty cycle
    for sweeps that would otherwise re-derive it per point.
    """
    if variable not in _SWEEPABLE:
        raise DomainError(f"sweep variable must be one of {_SWEEPABLE}")
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise DomainError("sweep grid must be a non-empty 1-D sequence")
    if g.size > 1:
        steps = np.diff(g)
        if not (np.all(steps > 0.0) or np.all(steps < 0.0)):
            raise DomainError("sweep grid must be strictly monotone")

    lv = np.array([_lvalue_at(params, scheme, variable, x, duty) for x in g])

    crossings = []
    f = lambda x: _lvalue_at(params, scheme, variable, x, duty) - 1.0
    resid = lv - 1.0
    for i in range(g.size - 1):
        a, b = resid[i], resid[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            crossings.append(float(g[i]))
            continue
        if a * b < 0.0:
            lo, hi = sorted((g[i], g[i + 1]))
            crossings.append(float(bisect(f, lo, hi, rtol=1e-9)))
    if g.size > 1 and np.isfinite(resid[-1]) and resid[-1] == 0.0:
        crossings.append(float(g[-1]))
    return LPlotCurve(variable, g, lv, tuple(sorted(crossings)))


def contour_data(D_grid: Sequence[float], p_grid: Sequence[float]) -> np.ndarray:
    """Surface alpha0(D) - alpha(D, p) over the grid, shape (len(D), len(p)).

    The supremum of the surface over the whole domain is pi.
    """
    D = np.asarray(D_grid, dtype=float)
    p = np.asarray(p_grid, dtype=float)
    if D.ndim != 1 or p.ndim != 1 or D.size == 0 or p.size == 0:
        raise DomainError("grids must be non-empty 1-D sequences")
    for grid in (D, p):
        if grid.size > 1:
            steps = np.diff(grid)
            if not (np.all(steps > 0.0) or np.all(steps < 0.0)):
                raise DomainError("grids must be strictly monotone")
    return alpha0(D)[:, None] - alpha(D[:, None], p[None, :])


# ---------------------------------------------------------------------------
# Solving the critical condition for one chosen parameter.


def _solve_vs_coupled(params, scheme, duty):
    """Critical v_s when the duty itself depends on v_s (no override given)."""

    def g(v):
        pr = replace(params, v_s=v)
        return closed_form_lvalue(pr, scheme, duty_ratio(pr, scheme)) - 1.0

    # the duty must stay inside (0, 1): scan a log grid above the reference
    lo = params.v_r * 1.01 if isinstance(scheme, (PVMC, VMC3)) else params.v_s * 1e-3
    vs_grid = np.geomspace(max(lo, 1e-6), params.v_s * 1e4, 240)
    prev = None
    for v in vs_grid:
        try:
            val = g(v)
        except DomainError:
            prev = None
            continue
        if prev is not None and (val == 0.0 or np.sign(val) != np.sign(prev[1])):
            return brentq(g, prev[0], v, xtol=1e-14 * params.v_s, rtol=8.9e-16)
        prev = (v, val)
    raise NoRoot("no critical v_s found on the search range")


def solve_critical(
    params: BuckParams,
    scheme: ControlScheme,
    solve_for: str,
    duty: Optional[float] = None,
) -> CriticalResult:
    """Solve L = 1 for one parameter (v_s, k_p, m_a, or D).

    Returns the present L together with the critical parameter value.
    DomainError marks parameter/scheme pairs without a closed-form route;
    NoRoot means the search range contains no boundary.
    """
    if solve_for not in ("v_s", "k_p", "m_a", "D"):
        raise DomainError("solve-for must be one of v_s, k_p, m_a, D")

    def current_duty():
        return duty if duty is not None else duty_ratio(params, scheme)

    if solve_for == "D":
        if isinstance(scheme, CMC):
            # exact rearrangement: D = 1/2 + m_a L / v_s
            D_crit = 0.5 + params.ramp_slope * params.L / params.v_s
            if D_crit > 1.0:
                raise DomainError("ramp strong enough that no critical D exists")
            lv = closed_form_lvalue(params, scheme, D_crit)
            return CriticalResult(lvalue=lv, critical_value=D_crit)
        curve = lplot(params, scheme, "D", np.linspace(1e-3, 1.0 - 1e-3, 512), duty)
        if not curve.crossings:
            raise NoRoot("L never crosses 1 over the duty range")
        return CriticalResult(
            lvalue=closed_form_lvalue(params, scheme, current_duty()),
            critical_value=curve.crossings[0],
        )

    if isinstance(scheme, CMC):
        D = current_duty()
        lv = closed_form_lvalue(params, scheme, D)
        if solve_for == "m_a":
            return CriticalResult(lvalue=lv, critical_value=critical_cmc(params, D))
        if solve_for == "v_s":
            if D <= 0.5:
                raise DomainError("for D <= 1/2 the CMC loop is stable at any v_s")
            if params.V_m == 0.0:
                raise DomainError("no finite critical v_s with a zero ramp")
            return CriticalResult(
                lvalue=lv,
                critical_value=params.ramp_slope * params.L / (D - 0.5),
            )
        raise DomainError("CMC has no gain k_p to solve for")

    if isinstance(scheme, (PVMC, CFPVR)):
        D = current_duty()
        lv = closed_form_lvalue(params, scheme, D)
        if solve_for == "m_a":
            return CriticalResult(
                lvalue=lv, critical_value=v2_min_ramp(params, scheme.k_p, D)
            )
        if lv <= 0.0:
            raise DomainError("L is not positive; no finite critical value")
        if solve_for == "v_s":
            return CriticalResult(lvalue=lv, critical_value=params.v_s / lv)
        return CriticalResult(lvalue=lv, critical_value=scheme.k_p / lv)

    if isinstance(scheme, RLP):
        if solve_for != "k_p":
            raise DomainError("the RL loop solves for k_p only")
        kp, _ = rlp_critical_kp(params)
        return CriticalResult(
            lvalue=critical_rlp(params, scheme.k_p).lvalue, critical_value=kp
        )

    # ACMC / VMC3
    D_now = current_duty()
    lv = closed_form_lvalue(params, scheme, D_now)
    if solve_for == "m_a":
        if lv <= 0.0:
            raise DomainError("L is not positive; no ramp boundary here")
        return CriticalResult(
            lvalue=lv, critical_value=params.V_m * lv * params.f_s
        )
    if solve_for == "k_p":
        raise DomainError("this scheme has no proportional gain k_p")
    if duty is not None:
        res = (
            critical_acmc(params, scheme, duty)
            if isinstance(scheme, ACMC)
            else critical_vmc3(params, scheme, duty)
        )
        if res.critical_value is None:
            raise DomainError("no finite critical v_s at this duty")
        return res
    vs = _solve_vs_coupled(params, scheme, duty)
    return CriticalResult(lvalue=lv, critical_value=vs)
