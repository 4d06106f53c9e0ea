"""Closed-form solutions, orbit geometry and quadratures for H3.

These are the oracles the RK4 integrator is checked against. The radial
quadratures work in ``x = cosh(r/rho)``, where the radial potential

    w = A rho^2 (x^2 - 1) - (K - W x)^2,   K = I + omega rho^2, W = omega rho^2

is a quadratic with an exact factorisation. Turning points are therefore
known in closed form and their inverse-square-root singularities are removed
by the substitution ``x = x_turn +- u^2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize

from .field import FieldParams
from .geometry import SpaceChart, State
from .invariants import (
    InvalidStateError,
    MotionConstants,
    ParticleParams,
    cyclotron_omega,
    invariant_C,
)

REL_TOL = 1e-12
QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


class MarginalCaseError(ValueError):
    """epsilon == A (or A == omega^2 rho^2): no closed form is used."""


class DegenerateError(ValueError):
    """Constants make the requested quantity meaningless (e.g. A = 0)."""


class UnboundedOrbitError(ValueError):
    """The orbit is not a circle: A >= omega^2 rho^2."""


class ZRegime(enum.Enum):
    CROSSING = "Crossing"
    REFLECTED = "Reflected"
    MARGINAL = "Marginal"


class OrbitClass(enum.Enum):
    BOUNDED_CIRCLE = "BoundedCircle"
    MARGINAL_HOROCYCLIC = "MarginalHorocyclic"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class OrbitGeometry:
    r0: float
    R: float
    phi0: float = 0.0


@dataclass(frozen=True)
class ForbiddenRegion:
    regime: ZRegime
    z_minus: Optional[float] = None
    z_plus: Optional[float] = None


def _require_h3(chart: SpaceChart):
    if chart.kappa != -1:
        raise NotImplementedError("closed-form solutions are only available for H3 (kappa=-1)")


def _close(a: float, b: float, tol: float = REL_TOL) -> bool:
    return abs(a - b) <= tol * max(abs(a), abs(b))


# --- motion along z ---------------------------------------------------------

def forbidden_region(constants: MotionConstants, chart: SpaceChart, tol: float = REL_TOL) -> ForbiddenRegion:
    _require_h3(chart)
    eps, A = constants.epsilon, constants.A
    if eps <= 0:
        raise DegenerateError("epsilon must be positive")
    if eps > A * (1 + tol):
        return ForbiddenRegion(ZRegime.CROSSING)
    if eps < A * (1 - tol):
        zp = chart.rho * math.asinh(math.sqrt(A / eps - 1.0))
        return ForbiddenRegion(ZRegime.REFLECTED, -zp, zp)
    return ForbiddenRegion(ZRegime.MARGINAL)


def z_closed_form(constants: MotionConstants, chart: SpaceChart, t, t0: float, sign: int):
    """``(z, vz)`` at time(s) ``t``.

    For epsilon > A the particle crosses z = 0 at ``t0``; for epsilon < A
    ``t0`` is the turning point. ``sign`` selects the branch.
    """
    _require_h3(chart)
    eps, A, rho = constants.epsilon, constants.A, chart.rho
    if eps <= 0:
        raise DegenerateError("epsilon = 0: z is constant")
    regime = forbidden_region(constants, chart).regime
    if regime is ZRegime.MARGINAL:
        raise MarginalCaseError("epsilon == A has no closed form here")
    sign = 1 if sign >= 0 else -1
    tau = math.sqrt(eps) * (np.asarray(t, dtype=float) - t0) / rho
    sh2 = np.sinh(tau) ** 2
    if regime is ZRegime.CROSSING:
        s = sign * math.sqrt(1.0 - A / eps) * np.sinh(tau)
        speed2 = eps - A * eps / ((eps - A) * sh2 + eps)
        vz = sign * np.sqrt(np.maximum(speed2, 0.0))
    else:
        s = sign * math.sqrt(A / eps - 1.0) * np.cosh(tau)
        speed2 = eps - A * eps / ((A - eps) * sh2 + A)
        # moving toward the turning point before t0, away after it
        vz = sign * np.sign(tau) * np.sqrt(np.maximum(speed2, 0.0))
    z = rho * np.arcsinh(s)
    if np.ndim(z) == 0:
        return float(z), float(vz)
    return z, vz


def fit_z_phase(constants: MotionConstants, chart: SpaceChart, z: float, vz: float, t: float = 0.0):
    """``(t0, sign)`` such that :func:`z_closed_form` passes through ``(t, z, vz)``."""
    _require_h3(chart)
    eps, A, rho = constants.epsilon, constants.A, chart.rho
    regime = forbidden_region(constants, chart).regime
    if regime is ZRegime.MARGINAL:
        raise MarginalCaseError("epsilon == A has no closed form here")
    s = math.sinh(z / rho)
    root_eps = math.sqrt(eps)
    if regime is ZRegime.CROSSING:
        sign = 1 if vz >= 0 else -1
        tau = math.asinh(s / (sign * math.sqrt(1.0 - A / eps)))
    else:
        sign = 1 if s >= 0 else -1
        ratio = max(abs(s) / math.sqrt(A / eps - 1.0), 1.0)
        tau = math.acosh(ratio) * (1 if vz * sign >= 0 else -1)
    return t - rho * tau / root_eps, sign


# --- radial motion and orbit geometry ----------------------------------------

def classify_orbit(constants: MotionConstants, chart: SpaceChart, tol: float = REL_TOL) -> OrbitClass:
    _require_h3(chart)
    if constants.omega == 0:
        raise DegenerateError("omega = 0: no magnetic rotation")
    limit = (constants.omega * chart.rho) ** 2
    if _close(constants.A, limit, tol):
        return OrbitClass.MARGINAL_HOROCYCLIC
    return OrbitClass.BOUNDED_CIRCLE if constants.A < limit else OrbitClass.UNBOUNDED


def circle_params(constants: MotionConstants, chart: SpaceChart, phi0: float = 0.0) -> OrbitGeometry:
    """Radius ``r0`` and centre offset ``R`` of the projected circle."""
    _require_h3(chart)
    if constants.omega == 0:
        raise DegenerateError("omega = 0")
    if classify_orbit(constants, chart) is not OrbitClass.BOUNDED_CIRCLE:
        raise UnboundedOrbitError("A >= omega^2 rho^2: the projected orbit is not a circle")
    rho = chart.rho
    w = constants.omega * rho ** 2
    root = math.sqrt(1.0 - constants.A / (constants.omega * rho) ** 2)
    cosh_r0 = 1.0 / root
    cosh_R = abs((constants.I + w) / (w * root))
    return OrbitGeometry(
        r0=rho * math.acosh(cosh_r0),
        R=rho * math.acosh(max(cosh_R, 1.0)),
        phi0=phi0,
    )


def onaxis_constants(chart: SpaceChart, omega: float, r0: float):
    """``(A, I)`` of motion on the cylinder ``r = r0`` centred on the z axis."""
    _require_h3(chart)
    if r0 < 0:
        raise ValueError("r0 must be >= 0")
    rho = chart.rho
    A = (omega * rho * math.tanh(r0 / rho)) ** 2
    I = omega * rho ** 2 * (1.0 / math.cosh(r0 / rho) - 1.0)
    return A, I


def orbit_residual(chart: SpaceChart, r, phi, constants: MotionConstants, phi0: float):
    """LHS - RHS of the projected orbit equation."""
    _require_h3(chart)
    rho = chart.rho
    w = constants.omega * rho ** 2
    lhs = (constants.I + w) * np.cosh(np.asarray(r) / rho) - w
    rhs = math.sqrt(max(constants.C, 0.0)) * rho * np.sinh(np.asarray(r) / rho) * np.cos(np.asarray(phi) - phi0)
    out = lhs - rhs
    return float(out) if np.ndim(out) == 0 else out


def normalized_orbit_residual(chart: SpaceChart, r, phi, constants: MotionConstants, phi0: float):
    """:func:`orbit_residual` divided by the magnitude of its terms."""
    rho = chart.rho
    w = constants.omega * rho ** 2
    r = np.asarray(r, dtype=float)
    scale = (abs(constants.I + w) * np.cosh(r / rho) + abs(w)
             + math.sqrt(max(constants.C, 0.0)) * rho * np.sinh(r / rho))
    return orbit_residual(chart, r, phi, constants, phi0) / scale


def orbit_phase(chart: SpaceChart, state: State, constants: MotionConstants) -> float:
    """Azimuth ``phi0`` of the circle centre, from a single state.

    Uses ``sqrt(C) cos(phi - phi0) = rho S(r) (omega + C(r) C(z)^2 vphi)`` and
    ``sqrt(C) sin(phi - phi0) = C(z)^2 vr``, so the branch is fixed by the
    sign of the radial velocity and no turning point needs to be excluded.
    """
    _require_h3(chart)
    if constants.C <= REL_TOL * max(constants.A, (constants.omega * chart.rho) ** 2):
        raise DegenerateError("C = 0: the circle is centred on the axis, phi0 is undefined")
    rho = chart.rho
    cz2 = math.cosh(state.z / rho) ** 2
    along = rho * math.sinh(state.r / rho) * (constants.omega + math.cosh(state.r / rho) * cz2 * state.vphi)
    across = cz2 * state.vr
    return state.phi - math.atan2(across, along)


@dataclass(frozen=True)
class _Radial:
    """Factorised radial potential ``w = a (x - x1)(x - x2)``."""

    a: float
    x1: float        # lower root (x1 <= x2 for bounded orbits)
    x2: float
    x1m1: float      # x1 - 1 without cancellation
    x2m1: float
    K: float
    W: float
    bounded: bool


def _radial(constants: MotionConstants, chart: SpaceChart) -> _Radial:
    _require_h3(chart)
    A, I, omega, rho = constants.A, constants.I, constants.omega, chart.rho
    if A <= 0:
        raise DegenerateError("A = 0: no transverse motion")
    W = omega * rho ** 2
    K = I + W
    C = invariant_C(constants, chart)
    if C < -1e-12 * max(A, W * W / rho ** 2, K * K / rho ** 2):
        raise InvalidStateError(f"C = {C} < 0: no real orbit has these integrals")
    C = max(C, 0.0)
    cls = classify_orbit(constants, chart)
    if cls is OrbitClass.MARGINAL_HOROCYCLIC:
        raise MarginalCaseError("A == omega^2 rho^2: turning-point quadratic degenerates")
    a = A * rho ** 2 - W ** 2
    disc = rho ** 2 * math.sqrt(A * C)
    # x - 1 numerators written so the I -> 0 case does not cancel
    if cls is OrbitClass.BOUNDED_CIRCLE:
        d = -a
        x1m1, x2m1 = (I * W + A * rho ** 2 - disc) / d, (I * W + A * rho ** 2 + disc) / d
        return _Radial(a, 1 + x1m1, 1 + x2m1, max(x1m1, 0.0), x2m1, K, W, True)
    x1m1 = (-I * W - A * rho ** 2 + disc) / a
    x2m1 = (-I * W - A * rho ** 2 - disc) / a
    return _Radial(a, 1 + x1m1, 1 + x2m1, max(x1m1, 0.0), x2m1, K, W, False)


def radial_turning_points(constants: MotionConstants, chart: SpaceChart):
    """``(r_min, r_max)``; ``r_max`` is ``math.inf`` for unbounded orbits."""
    return radial_turning_points_from(_radial(constants, chart), chart)


def _xm1(r, rho):
    return 2.0 * np.sinh(np.asarray(r, dtype=float) / (2 * rho)) ** 2


def _radial_integral(rad: _Radial, chart: SpaceChart, r_lo: float, r_hi: float, kind: str) -> float:
    """Integral of ``f(x) dx / sqrt(w)`` over ``[r_lo, r_hi]`` with turning points tamed.

    ``kind='r'`` integrates the radial-phase side ``rho^2 dx/sqrt(w)``;
    ``kind='phi'`` the azimuth ``J dx / ((x^2-1) sqrt(w))``.
    """
    if r_hi < r_lo:
        return -_radial_integral(rad, chart, r_hi, r_lo, kind)
    if r_hi == r_lo:
        return 0.0
    rho = chart.rho
    a_abs = abs(rad.a)
    I = rad.K - rad.W

    def f(xm1):
        if kind == "r":
            return rho ** 2
        return I / (xm1 * (xm1 + 2.0)) - rad.W / (xm1 + 2.0)

    lo, hi = float(_xm1(r_lo, rho)), float(_xm1(r_hi, rho))
    span = rad.x2m1 - rad.x1m1
    if lo < rad.x1m1 - 1e-12 * (1 + rad.x1m1) or (rad.bounded and hi > rad.x2m1 + 1e-12 * (1 + rad.x2m1)):
        raise InvalidStateError("interval leaves the classically allowed radial region (w < 0)")
    lo = max(lo, rad.x1m1)

    def from_lower(u):
        # x = x1 + u^2 ; w = a_abs * u^2 * |x - x2|
        xm1 = rad.x1m1 + u * u
        return 2.0 * f(xm1) / math.sqrt(a_abs * abs(xm1 - rad.x2m1))

    def from_upper(u):
        xm1 = rad.x2m1 - u * u
        return 2.0 * f(xm1) / math.sqrt(a_abs * abs(xm1 - rad.x1m1))

    total = 0.0
    if rad.bounded:
        hi = min(hi, rad.x2m1)
        mid = rad.x1m1 + 0.5 * span
        if lo < mid:
            top = min(hi, mid)
            total += sp_integrate.quad(from_lower, math.sqrt(lo - rad.x1m1), math.sqrt(top - rad.x1m1), **QUAD_OPTS)[0]
        if hi > mid:
            bottom = max(lo, mid)
            total += sp_integrate.quad(from_upper, math.sqrt(rad.x2m1 - hi), math.sqrt(rad.x2m1 - bottom), **QUAD_OPTS)[0]
        return total
    return sp_integrate.quad(from_lower, math.sqrt(lo - rad.x1m1), math.sqrt(hi - rad.x1m1), **QUAD_OPTS)[0]


def _allowed_r(rad: _Radial, chart: SpaceChart, r: float) -> None:
    r_min, r_max = radial_turning_points_from(rad, chart)
    slack = 1e-12 * chart.rho
    if r < r_min - slack or r > r_max + slack:
        raise InvalidStateError(f"r={r} outside the allowed band [{r_min}, {r_max}]")


def radial_turning_points_from(rad: _Radial, chart: SpaceChart):
    rho = chart.rho
    # acosh(1 + d) = 2 asinh(sqrt(d / 2)), exact near the axis
    r_min = 2 * rho * math.asinh(math.sqrt(rad.x1m1 / 2))
    if not rad.bounded:
        return r_min, math.inf
    return r_min, 2 * rho * math.asinh(math.sqrt(max(rad.x2m1, 0.0) / 2))


def quadrature_phi_of_r(
    constants: MotionConstants, chart: SpaceChart, r_from: float, r_to: float, phi_from: float
) -> float:
    """Azimuth reached when r moves monotonically from ``r_from`` to ``r_to``.

    The azimuthal rate does not depend on the direction of radial motion,
    so the increment is the integral over ``|dr|``. Either endpoint may sit
    exactly on a turning point.
    """
    if r_from == r_to:
        return phi_from
    rad = _radial(constants, chart)
    for r in (r_from, r_to):
        _allowed_r(rad, chart, r)
    return phi_from + _radial_integral(rad, chart, min(r_from, r_to), max(r_from, r_to), "phi")


def half_sweep(constants: MotionConstants, chart: SpaceChart) -> float:
    """Azimuth swept between the two radial turning points (bounded orbits)."""
    rad = _radial(constants, chart)
    if not rad.bounded:
        raise UnboundedOrbitError("no outer turning point")
    r_min, r_max = radial_turning_points_from(rad, chart)
    return _radial_integral(rad, chart, r_min, r_max, "phi")


def phi_along_samples(constants: MotionConstants, chart: SpaceChart, r, vr, phi_start: float):
    """Azimuth at each sample of a radial path, by piecewise quadrature.

    ``vr`` supplies the branch; a sign change between neighbouring samples
    means one turning point was passed in between.
    """
    rad = _radial(constants, chart)
    r_min, r_max = radial_turning_points_from(rad, chart)
    r = np.asarray(r, dtype=float)
    vr = np.asarray(vr, dtype=float)
    out = np.empty_like(r)
    out[0] = phi_start
    for k in range(len(r) - 1):
        a, b = float(r[k]), float(r[k + 1])
        if np.sign(vr[k]) == np.sign(vr[k + 1]) or vr[k] == 0 or vr[k + 1] == 0:
            d = _radial_integral(rad, chart, min(a, b), max(a, b), "phi")
        else:
            turn = r_max if vr[k] > 0 else r_min
            d = (_radial_integral(rad, chart, min(a, turn), max(a, turn), "phi")
                 + _radial_integral(rad, chart, min(b, turn), max(b, turn), "phi"))
        out[k + 1] = out[k] + d
    return out


def z_phase_integral(constants: MotionConstants, chart: SpaceChart, z_from: float, z_to: float) -> float:
    """Signed integral of ``dz / (C(z) sqrt(eps C(z)^2 - A))``.

    Substituting ``s = sinh(z/rho)`` gives the smooth integrand
    ``rho / ((1 + s^2) sqrt(eps (1 + s^2) - A))``.
    """
    _require_h3(chart)
    eps, A, rho = constants.epsilon, constants.A, chart.rho
    s_a, s_b = math.sinh(z_from / rho), math.sinh(z_to / rho)
    for s in (s_a, s_b):
        if eps * (1 + s * s) <= A:
            raise InvalidStateError("z interval enters the forbidden region")
    if s_a * s_b < 0 and eps <= A:
        raise InvalidStateError("z interval crosses the forbidden region")

    def g(s):
        q = 1 + s * s
        return rho / (q * math.sqrt(eps * q - A))

    return sp_integrate.quad(g, s_a, s_b, **QUAD_OPTS)[0]


def quadrature_r_of_z(
    constants: MotionConstants,
    chart: SpaceChart,
    z_from: float,
    z_to: float,
    r_from: float,
    vr_sign: int = 1,
) -> float:
    """Radius reached when z moves monotonically from ``z_from`` to ``z_to``.

    Both sides of the orbit relation measure the same parameter
    ``integral dt / C(z)^2``; the radial side is inverted by root finding on
    its cumulative integral, reflecting at turning points. ``vr_sign`` is the
    direction of radial motion at ``r_from``.
    """
    if z_from == z_to:
        return r_from
    scale = max(constants.A, (constants.omega * chart.rho) ** 2)
    if invariant_C(constants, chart) <= 1e-10 * scale:
        # on-axis cylinder: both sides degenerate, r stays put
        z_phase_integral(constants, chart, z_from, z_to)
        return r_from
    phase = abs(z_phase_integral(constants, chart, z_from, z_to))
    rad = _radial(constants, chart)
    _allowed_r(rad, chart, r_from)
    r_min, r_max = radial_turning_points_from(rad, chart)

    def cumulative(r):
        return _radial_integral(rad, chart, r_min, min(max(r, r_min), r_max), "r")

    p0 = cumulative(r_from)
    if rad.bounded:
        half = cumulative(r_max)
        p = (p0 if vr_sign >= 0 else 2 * half - p0) + phase
        p = math.fmod(p, 2 * half)
        target = p if p <= half else 2 * half - p
        if target <= 0:
            return r_min
        if target >= half:
            return r_max
        return optimize.brentq(lambda r: cumulative(r) - target, r_min, r_max, xtol=1e-15, rtol=1e-15)
    target = p0 + phase if vr_sign >= 0 else abs(phase - p0)
    if target <= 0:
        return r_min
    hi = max(r_from, r_min) + chart.rho
    while cumulative(hi) < target:
        hi = r_min + 2 * (hi - r_min)
    return optimize.brentq(lambda r: cumulative(r) - target, r_min, hi, xtol=1e-15, rtol=1e-15)


# --- motion on the on-axis cylinder (C = 0) -----------------------------------

def phi_closed_form_onaxis(
    constants: MotionConstants, chart: SpaceChart, r0: float, t, t0: float, phi0: float
):
    """``(phi, vphi)`` on the cylinder ``r = r0``; ``phi(t0) = phi0``.

    ``t0`` is the z-motion epoch of :func:`z_closed_form`.
    """
    _require_h3(chart)
    eps, A, omega, rho = constants.epsilon, constants.A, constants.omega, chart.rho
    if A <= 0:
        raise DegenerateError("A = 0: no rotation, phi is constant")
    regime = forbidden_region(constants, chart).regime
    if regime is ZRegime.MARGINAL:
        raise MarginalCaseError("epsilon == A has no closed form here")
    ch0 = math.cosh(r0 / rho)
    tau = math.sqrt(eps) * (np.asarray(t, dtype=float) - t0) / rho
    amp = -omega * rho / (ch0 * math.sqrt(A))
    sh2 = np.sinh(tau) ** 2
    if regime is ZRegime.CROSSING:
        phi = phi0 + amp * np.arctanh(math.sqrt(A / eps) * np.tanh(tau))
        vphi = -omega * eps / (ch0 * ((eps - A) * sh2 + eps))
    else:
        phi = phi0 + amp * np.arctanh(math.sqrt(eps / A) * np.tanh(tau))
        vphi = -omega * eps / (ch0 * ((A - eps) * sh2 + A))
    if np.ndim(phi) == 0:
        return float(phi), float(vphi)
    return phi, vphi


def swept_angle_limit(constants: MotionConstants, chart: SpaceChart, r0: float) -> float:
    """Total azimuth swept for t -> infinity on the cylinder when epsilon > A."""
    _require_h3(chart)
    eps, A = constants.epsilon, constants.A
    if not eps > A > 0:
        raise DegenerateError("finite sweep limit needs epsilon > A > 0")
    return (constants.omega * chart.rho / (math.cosh(r0 / chart.rho) * math.sqrt(A))
            * math.atanh(math.sqrt(A / eps)))


# --- building initial data ------------------------------------------------------

def state_from_constants(
    chart: SpaceChart,
    epsilon: float,
    omega: float,
    A: float,
    I: float,
    r: float,
    z: float,
    phi: float = 0.0,
    vr_sign: int = 1,
    vz_sign: int = 1,
    t: float = 0.0,
) -> State:
    """A state at position ``(r, phi, z)`` carrying the prescribed integrals.

    ``omega`` must be the cyclotron frequency the field produces at this
    ``epsilon``; see :func:`curved_larmor.invariants.field_for_omega`.
    """
    from .dynamics import first_order_rates

    consts = MotionConstants(epsilon=epsilon, omega=omega, I=I, A=A, C=0.0)
    vz2, vr2, vphi = first_order_rates(consts, chart, r, z)
    tol = 1e-12 * max(epsilon, A, 1e-300)
    if vz2 < -tol:
        raise InvalidStateError(f"z={z} lies in the forbidden region (vz^2={vz2})")
    if vr2 < -tol:
        raise InvalidStateError(f"r={r} lies outside the radial band (vr^2={vr2})")
    vz = math.copysign(math.sqrt(max(vz2, 0.0)), vz_sign)
    vr = math.copysign(math.sqrt(max(vr2, 0.0)), vr_sign)
    return State(r=r, phi=phi, z=z, vr=vr, vphi=vphi, vz=vz, t=t)


def onaxis_state(
    chart: SpaceChart,
    epsilon: float,
    omega: float,
    r0: float,
    z: float = 0.0,
    phi: float = 0.0,
    vz_sign: int = 1,
    t: float = 0.0,
) -> State:
    """State on the cylinder ``r = r0`` (C = 0): ``vr = 0`` and vphi from the cylinder law."""
    _require_h3(chart)
    A, _ = onaxis_constants(chart, omega, r0)
    rho = chart.rho
    cz2 = math.cosh(z / rho) ** 2
    vz2 = epsilon - A / cz2
    if vz2 < 0:
        raise InvalidStateError(f"z={z} lies in the forbidden region")
    vphi = -omega / (math.cosh(r0 / rho) * cz2)
    return State(r=r0, phi=phi, z=z, vr=0.0, vphi=vphi, vz=math.copysign(math.sqrt(vz2), vz_sign), t=t)


# --- flat-space reference ---------------------------------------------------------

def euclidean_reference(
    particle: ParticleParams, field: FieldParams, initial: State, t, c: float = 1.0
) -> State:
    """Uniform-field helix in flat space with the same initial data.

    Polar ``(r, phi)`` are read as ordinary cylindrical coordinates. The
    rotation sense matches the curved equations (clockwise for omega > 0).
    Array ``t`` yields a State of arrays with ``phi`` unwrapped.
    """
    r0, p0 = initial.r, initial.phi
    x0 = complex(r0 * math.cos(p0), r0 * math.sin(p0))
    v0 = complex(math.cos(p0), math.sin(p0)) * complex(initial.vr, r0 * initial.vphi)
    eps = abs(v0) ** 2 + initial.vz ** 2
    omega = cyclotron_omega(particle, field, SpaceChart(c=c), eps)
    dt = np.asarray(t, dtype=float) - initial.t
    if omega == 0:
        pos = x0 + v0 * dt
        vel = v0 * np.ones_like(dt)
    else:
        rot = np.exp(-1j * omega * dt)
        pos = x0 + v0 * (1 - rot) / (1j * omega)
        vel = v0 * rot
    r = np.abs(pos)
    phi = np.angle(pos)
    if np.ndim(phi) > 0:
        phi = np.unwrap(np.concatenate([[p0], phi]))[1:]
    else:
        phi = float(phi) + 2 * math.pi * round((p0 - float(phi)) / (2 * math.pi))
    unit = pos / np.where(r == 0, 1.0, r)
    local = vel * np.conj(unit)
    vr = local.real
    vphi = np.where(r == 0, 0.0, local.imag / np.where(r == 0, 1.0, r))
    z = initial.z + initial.vz * dt
    if np.ndim(dt) == 0:
        return State(float(r), float(phi), float(z), float(vr), float(vphi), initial.vz, float(t))
    return State(r, phi, z, vr, vphi, np.full_like(dt, initial.vz), np.asarray(t, dtype=float))

