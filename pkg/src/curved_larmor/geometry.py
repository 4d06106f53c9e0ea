"""Constant-curvature charts, the ambient embedding, and geodesic circles.

Both spaces are handled by one set of formulas parameterized by the
curvature sign ``kappa``: ``-1`` selects the Lobachevsky space H3
(sinh/cosh), ``+1`` the spherical space S3 (sin/cos).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """A state lies outside (or on the degenerate boundary of) its chart."""


@dataclass(frozen=True)
class SpaceChart:
    kappa: int = -1
    rho: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.kappa not in (-1, 1):
            raise ValueError(f"kappa must be -1 or +1, got {self.kappa!r}")
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"rho must be a positive finite length, got {self.rho!r}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"c must be a positive finite speed, got {self.c!r}")

    @property
    def hyperbolic(self) -> bool:
        return self.kappa == -1


@dataclass(frozen=True)
class State:
    """Position ``(r, phi, z)`` and coordinate velocities at time ``t``.

    ``phi`` is kept unwrapped so swept angles can be read off directly;
    use :attr:`phi_wrapped` for the value reduced to ``[0, 2*pi)``.
    """

    r: float
    phi: float = 0.0
    z: float = 0.0
    vr: float = 0.0
    vphi: float = 0.0
    vz: float = 0.0
    t: float = 0.0

    @property
    def phi_wrapped(self) -> float:
        return self.phi % TWO_PI

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.phi, self.z, self.vr, self.vphi, self.vz])

    @classmethod
    def from_array(cls, y, t: float = 0.0) -> "State":
        r, phi, z, vr, vphi, vz = (float(v) for v in y)
        return cls(r, phi, z, vr, vphi, vz, t)

    def with_time(self, t: float) -> "State":
        return replace(self, t=t)


@dataclass(frozen=True)
class Embedded:
    u0: float
    u1: float
    u2: float
    u3: float

    def quadric(self, kappa: int) -> float:
        """Ambient quadratic form; equals ``rho**2`` for points on the manifold."""
        spatial = self.u1 ** 2 + self.u2 ** 2 + self.u3 ** 2
        return self.u0 ** 2 + spatial if kappa == 1 else self.u0 ** 2 - spatial


def ktrig(chart: SpaceChart, x):
    """Return ``(S, C)``: sinh/cosh of ``x/rho`` for H3, sin/cos for S3.

    Works on scalars and numpy arrays. ``C**2 + kappa*S**2 == 1``.
    """
    u = np.asarray(x, dtype=float) / chart.rho
    if chart.kappa == -1:
        s, c = np.sinh(u), np.cosh(u)
    else:
        s, c = np.sin(u), np.cos(u)
    if np.ndim(s) == 0:
        return float(s), float(c)
    return s, c


def check_domain(chart: SpaceChart, state: State) -> None:
    """Raise :class:`DomainError` if ``state`` is not inside the chart."""
    vals = (state.r, state.phi, state.z, state.vr, state.vphi, state.vz, state.t)
    if not all(math.isfinite(v) for v in vals):
        raise DomainError("state has non-finite components")
    if state.r < 0:
        raise DomainError(f"r must be >= 0, got {state.r}")
    if chart.kappa == 1:
        # cos(z/rho) = 0 collapses the metric; reject rather than extrapolate
        if abs(state.z) >= 0.5 * math.pi * chart.rho:
            raise DomainError(f"|z|/rho must be < pi/2 on S3, got z={state.z}")
        if state.r > math.pi * chart.rho:
            raise DomainError(f"r/rho must be <= pi on S3, got r={state.r}")


def embed(chart: SpaceChart, state: State) -> Embedded:
    """Map chart coordinates to the ambient 4D (pseudo-)Euclidean space."""
    rho = chart.rho
    sr, cr = ktrig(chart, state.r)
    sz, cz = ktrig(chart, state.z)
    return Embedded(
        u0=rho * cz * cr,
        u1=rho * cz * sr * math.cos(state.phi),
        u2=rho * cz * sr * math.sin(state.phi),
        u3=rho * sz,
    )


def embed_arrays(chart: SpaceChart, r, phi, z):
    """Vectorised :func:`embed` returning ``(u0, u1, u2, u3)`` arrays."""
    rho = chart.rho
    sr, cr = ktrig(chart, np.asarray(r, dtype=float))
    sz, cz = ktrig(chart, np.asarray(z, dtype=float))
    phi = np.asarray(phi, dtype=float)
    return rho * cz * cr, rho * cz * sr * np.cos(phi), rho * cz * sr * np.sin(phi), rho * sz


def circle_residual(chart: SpaceChart, r: float, phi: float, geom) -> float:
    """Residual of the geodesic-circle law for circle ``geom`` at ``(r, phi)``.

    Equal to ``C(R) C(r) - C(r0) - S(R) S(r) cos(phi - phi0)`` on H3 (cross
    term with ``+`` on S3); zero iff the point lies on the circle of radius
    ``geom.r0`` centred at distance ``geom.R`` in direction ``geom.phi0``.
    Evaluated in product form, so it stays accurate when all terms are
    close to 1 (large rho).
    """
    sR, _ = ktrig(chart, geom.R)
    sr, _ = ktrig(chart, r)
    d = geom.R - r
    s_plus, _ = ktrig(chart, 0.5 * (d + geom.r0))
    s_minus, _ = ktrig(chart, 0.5 * (d - geom.r0))
    half = math.sin(0.5 * (phi - geom.phi0))
    return -chart.kappa * 2.0 * (s_plus * s_minus + sR * sr * half * half)
