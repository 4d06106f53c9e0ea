"""Integrals of motion and the relativistic cyclotron frequency.

Every function here accepts scalars or equally-shaped numpy arrays for the
state components, so the same code evaluates a single state or a whole
sampled trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import FieldParams, coupling_profile
from .geometry import SpaceChart, State, ktrig


class InvalidStateError(ValueError):
    """The state is not admissible (e.g. speed at or above c)."""


@dataclass(frozen=True)
class ParticleParams:
    mass: float = 1.0
    charge: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.mass) and self.mass > 0):
            raise ValueError(f"mass must be positive, got {self.mass!r}")
        if not math.isfinite(self.charge):
            raise ValueError(f"charge must be finite, got {self.charge!r}")


@dataclass(frozen=True)
class MotionConstants:
    epsilon: float
    omega: float
    I: float
    A: float
    C: float


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _transverse(chart, r, z, vr, vphi, power):
    """``C(z)^power * (vr^2 + rho^2 S(r)^2 vphi^2)``.

    Grouped as squares of ``C(z)^(power/2) * velocity`` so that far from
    z = 0 the huge metric factor meets the tiny velocity before squaring.
    """
    sr, _ = ktrig(chart, r)
    _, cz = ktrig(chart, z)
    g = cz ** (power // 2)
    return (g * vr) ** 2 + (g * chart.rho * sr * vphi) ** 2


def squared_speed(chart: SpaceChart, state: State):
    return _scalar(state.vz ** 2 + _transverse(chart, state.r, state.z, state.vr, state.vphi, 2))


def cyclotron_omega(particle: ParticleParams, field: FieldParams, chart: SpaceChart, epsilon):
    eps = np.asarray(epsilon, dtype=float)
    if np.any(eps < 0) or np.any(eps >= chart.c ** 2):
        raise InvalidStateError(
            f"squared speed must satisfy 0 <= epsilon < c^2 = {chart.c ** 2}, got {epsilon}"
        )
    gyro = particle.charge * field.B / (particle.mass * chart.c)
    return _scalar(gyro * np.sqrt(1.0 - eps / chart.c ** 2))


def field_for_omega(particle: ParticleParams, chart: SpaceChart, epsilon: float, omega: float) -> FieldParams:
    """Field strength B that yields cyclotron frequency ``omega`` at speed^2 ``epsilon``."""
    if not 0 <= epsilon < chart.c ** 2:
        raise InvalidStateError(f"epsilon={epsilon} outside [0, c^2)")
    root = math.sqrt(1.0 - epsilon / chart.c ** 2)
    return FieldParams(B=omega * particle.mass * chart.c / (particle.charge * root))


def invariant_I(chart: SpaceChart, state: State, omega):
    """Generalised angular momentum (canonical p_phi per unit gamma*m)."""
    sr, _ = ktrig(chart, state.r)
    _, cz = ktrig(chart, state.z)
    m = coupling_profile(chart, state.r)
    return _scalar(omega * m + (chart.rho * sr) ** 2 * (cz ** 2 * state.vphi))


def invariant_A(chart: SpaceChart, state: State):
    return _scalar(_transverse(chart, state.r, state.z, state.vr, state.vphi, 4))


def invariant_C(constants: MotionConstants, chart: SpaceChart):
    """C from (A, I, omega): ``A + k w^2 rho^2 - k (I - k w rho^2)^2 / rho^2``.

    For H3 (k = -1) this is ``A - rho^2 w^2 + (I + w rho^2)^2 / rho^2``.
    """
    k = chart.kappa
    w_rho2 = constants.omega * chart.rho ** 2
    return _scalar(
        constants.A
        + k * constants.omega * w_rho2
        - k * (constants.I - k * w_rho2) ** 2 / chart.rho ** 2
    )


def invariant_C_direct(chart: SpaceChart, state: State, omega):
    """C straight from the state: a sum of two squares, hence >= 0."""
    sr, cr = ktrig(chart, state.r)
    _, cz = ktrig(chart, state.z)
    cz2 = cz ** 2
    return _scalar(
        (cz2 * state.vr) ** 2 + (chart.rho * sr) ** 2 * (cr * cz2 * state.vphi + omega) ** 2
    )


def motion_constants(
    chart: SpaceChart,
    particle: ParticleParams,
    field: FieldParams,
    state: State,
    omega=None,
) -> MotionConstants:
    """Evaluate all integrals at ``state``.

    ``omega`` is normally derived from the state's own squared speed; pass
    the trajectory's fixed value to evaluate it consistently along a run.
    """
    eps = squared_speed(chart, state)
    if omega is None:
        omega = cyclotron_omega(particle, field, chart, eps)
    return MotionConstants(
        epsilon=eps,
        omega=omega,
        I=invariant_I(chart, state, omega),
        A=invariant_A(chart, state),
        C=invariant_C_direct(chart, state, omega),
    )
