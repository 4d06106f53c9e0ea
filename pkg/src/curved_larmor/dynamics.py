"""Equations of motion and the fixed-step RK4 integrator.

The state vector is ``(r, phi, z, vr, vphi, vz)`` in coordinate velocities.
``omega`` is fixed from the initial squared speed and is never re-derived
mid-run, so integration error cannot feed back into the force law.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from numba import njit

from .field import FieldParams, coupling_profile
from .geometry import DomainError, SpaceChart, State, check_domain, ktrig
from .invariants import (
    MotionConstants,
    ParticleParams,
    cyclotron_omega,
    invariant_A,
    invariant_C_direct,
    invariant_I,
    squared_speed,
)

AXIS_GUARD = 1e-9  # in units of rho
DRIFT_FLOOR = 1e-30
INVARIANT_NAMES = ("epsilon", "I", "A", "C")

OK, DOMAIN_EXIT, SINGULARITY, NON_FINITE = 0, 1, 2, 3
_HALT_REASONS = {
    DOMAIN_EXIT: "domain exit",
    SINGULARITY: "coordinate singularity",
    NON_FINITE: "non-finite value",
}


class SingularityError(ArithmeticError):
    """Angular equation evaluated on the axis with nonzero angular velocity."""


class IntegrationHalted(RuntimeError):
    """Integration stopped early; ``trajectory`` holds the samples up to the halt."""

    def __init__(self, reason: str, trajectory: "Trajectory"):
        super().__init__(f"integration halted: {reason} at t={trajectory.t[-1]:.17g}")
        self.reason = reason
        self.trajectory = trajectory


@njit(cache=True)
def _accel(r, z, vr, vphi, vz, kappa, rho, omega):
    x = r / rho
    q = z / rho
    if kappa < 0:
        sr, cr = math.sinh(x), math.cosh(x)
        sz, cz = math.sinh(q), math.cosh(q)
    else:
        sr, cr = math.sin(x), math.cos(x)
        sz, cz = math.sin(q), math.cos(q)
    cz2 = cz * cz
    tz = sz / cz
    transverse = vr * vr + (rho * sr * vphi) ** 2
    ar = 2.0 * kappa / rho * tz * vz * vr + rho * sr * (cr * vphi + omega / cz2) * vphi
    az = -kappa / rho * cz * sz * transverse
    if sr == 0.0:
        # on the axis: only reachable with vphi == 0, continuity gives 0
        aphi = 0.0
    else:
        aphi = (
            2.0 * kappa / rho * tz * vz * vphi
            - 2.0 / rho * (cr / sr) * vr * vphi
            - omega * vr / (rho * sr * cz2)
        )
    return ar, aphi, az


@njit(cache=True)
def _rhs(y, kappa, rho, omega, out):
    ar, aphi, az = _accel(y[0], y[2], y[3], y[4], y[5], kappa, rho, omega)
    out[0] = y[3]
    out[1] = y[4]
    out[2] = y[5]
    out[3] = ar
    out[4] = aphi
    out[5] = az


@njit(cache=True)
def _check(y, kappa, rho, guard):
    for j in range(6):
        if not math.isfinite(y[j]):
            return NON_FINITE
    if y[0] < 0.0:
        # crossed the polar axis, where the chart is singular
        return SINGULARITY
    if kappa > 0:
        if abs(y[2]) >= 0.5 * math.pi * rho or y[0] > math.pi * rho:
            return DOMAIN_EXIT
        if math.pi * rho - y[0] < guard and y[4] != 0.0:
            return SINGULARITY
    if y[0] < guard and y[4] != 0.0:
        return SINGULARITY
    return OK


@njit(cache=True)
def _rk4_kernel(y0, h, n, kappa, rho, omega, guard, keep):
    """Run ``n`` RK4 steps. Returns (samples, count, status).

    With ``keep`` false only the first and the latest state are stored.
    """
    m = n + 1 if keep else 2
    ys = np.empty((m, 6))
    y = y0.copy()
    ys[0] = y
    k1 = np.empty(6)
    k2 = np.empty(6)
    k3 = np.empty(6)
    k4 = np.empty(6)
    tmp = np.empty(6)
    comp = np.zeros(6)  # Kahan compensation: keeps 1e5-step runs at rounding level
    status = _check(y, kappa, rho, guard)
    if status != OK:
        return ys, 1, status
    done = 0
    for i in range(n):
        _rhs(y, kappa, rho, omega, k1)
        for j in range(6):
            tmp[j] = y[j] + 0.5 * h * k1[j]
        _rhs(tmp, kappa, rho, omega, k2)
        for j in range(6):
            tmp[j] = y[j] + 0.5 * h * k2[j]
        _rhs(tmp, kappa, rho, omega, k3)
        for j in range(6):
            tmp[j] = y[j] + h * k3[j]
        _rhs(tmp, kappa, rho, omega, k4)
        for j in range(6):
            inc = h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) - comp[j]
            tmp[j] = y[j] + inc
            k1[j] = (tmp[j] - y[j]) - inc
        status = _check(tmp, kappa, rho, guard)
        if status != OK:
            break
        y[:] = tmp
        comp[:] = k1
        done = i + 1
        if keep:
            ys[done] = y
        else:
            ys[1] = y
    count = done + 1 if keep else min(done + 1, 2)
    return ys, count, status


def accelerations(chart: SpaceChart, state: State, omega: float):
    """Second derivatives ``(ar, aphi, az)`` at ``state``."""
    if state.r < AXIS_GUARD * chart.rho and state.vphi != 0.0:
        raise SingularityError("r is on the axis while vphi != 0")
    return _accel(state.r, state.z, state.vr, state.vphi, state.vz,
                  float(chart.kappa), chart.rho, float(omega))


def first_order_rates(constants: MotionConstants, chart: SpaceChart, r: float, z: float):
    """``(vz^2, vr^2, vphi)`` implied by the integrals at position ``(r, z)``.

    The squared rates may come out negative outside the allowed region;
    they are returned unclipped so turning points can be located.
    """
    sr, _ = ktrig(chart, r)
    if np.any(np.asarray(sr) == 0):
        raise ZeroDivisionError("radial and angular rates are undefined on the axis")
    _, cz = ktrig(chart, z)
    cz2 = cz ** 2
    j = constants.I - constants.omega * coupling_profile(chart, r)
    vz2 = constants.epsilon - constants.A / cz2
    vr2 = constants.A / cz2 ** 2 - j ** 2 / (cz2 ** 2 * (chart.rho * sr) ** 2)
    vphi = j / ((chart.rho * sr) ** 2 * cz2)
    return vz2, vr2, vphi


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples plus per-sample integrals and drift metadata."""

    t: np.ndarray
    y: np.ndarray
    chart: SpaceChart
    omega: float
    h: float
    invariants: dict
    drift: dict
    method: str = "rk4"
    wall_clock: float = 0.0
    status: str = "ok"
    extras: dict = dc_field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    r = property(lambda self: self.y[:, 0])
    phi = property(lambda self: self.y[:, 1])
    z = property(lambda self: self.y[:, 2])
    vr = property(lambda self: self.y[:, 3])
    vphi = property(lambda self: self.y[:, 4])
    vz = property(lambda self: self.y[:, 5])

    def state(self, i: int) -> State:
        return State.from_array(self.y[i], float(self.t[i]))

    def constants(self, i: int) -> MotionConstants:
        inv = self.invariants
        return MotionConstants(
            epsilon=float(inv["epsilon"][i]), omega=self.omega,
            I=float(inv["I"][i]), A=float(inv["A"][i]), C=float(inv["C"][i]),
        )

    def samples(self):
        for i in range(len(self)):
            yield self.state(i), self.constants(i)

    @property
    def final(self) -> State:
        return self.state(len(self) - 1)


def _array_state(t, y) -> State:
    return State(y[:, 0], y[:, 1], y[:, 2], y[:, 3], y[:, 4], y[:, 5], t)


def sample_invariants(chart: SpaceChart, t, y, omega: float) -> dict:
    st = _array_state(t, y)
    return {
        "epsilon": np.asarray(squared_speed(chart, st), dtype=float),
        "I": np.asarray(invariant_I(chart, st, omega), dtype=float),
        "A": np.asarray(invariant_A(chart, st), dtype=float),
        "C": np.asarray(invariant_C_direct(chart, st, omega), dtype=float),
    }


def _relative_drift(values) -> float:
    values = np.asarray(values, dtype=float)
    ref = values[0]
    return float(np.max(np.abs(values - ref)) / max(abs(ref), DRIFT_FLOOR))


def drift_from_invariants(invariants: dict, omega_samples=None) -> dict:
    out = {name: _relative_drift(invariants[name]) for name in INVARIANT_NAMES}
    if omega_samples is not None:
        out["omega"] = _relative_drift(omega_samples)
    return out


def drift_report(traj: Trajectory) -> dict:
    """Max relative drift of each integral (and of the reconstructed omega)."""
    omega_samples = traj.extras.get("omega_samples")
    return drift_from_invariants(traj.invariants, omega_samples)


def _steps_for(h: float, T: float):
    n = max(1, int(round(T / h)))
    if abs(n * h - T) > 1e-9 * max(T, h):
        n = math.ceil(T / h)
    return n, T / n


def _finish(chart, particle, field, t, y, omega, h, wall, status) -> Trajectory:
    for arr in (t, y):
        arr.flags.writeable = False
    inv = sample_invariants(chart, t, y, omega)
    for arr in inv.values():
        arr.flags.writeable = False
    eps = np.clip(inv["epsilon"], 0.0, np.nextafter(chart.c ** 2, 0.0))
    omega_samples = np.asarray(cyclotron_omega(particle, field, chart, eps), dtype=float).reshape(-1)
    drift = drift_from_invariants(inv, omega_samples)
    return Trajectory(
        t=t, y=y, chart=chart, omega=omega, h=h, invariants=inv, drift=drift,
        wall_clock=wall, status=status, extras={"omega_samples": omega_samples},
    )


def integrate(
    chart: SpaceChart,
    particle: ParticleParams,
    field: FieldParams,
    initial: State,
    h: float,
    T: float,
) -> Trajectory:
    """Integrate with classical RK4, keeping every step.

    If ``T/h`` is not an integer the step is shrunk so that a whole number
    of steps spans ``T``. Raises :class:`IntegrationHalted` (carrying the
    partial trajectory) on domain exit, axis singularity or overflow.
    """
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"step h must be positive, got {h}")
    if not (T > 0 and math.isfinite(T)):
        raise ValueError(f"duration T must be positive, got {T}")
    check_domain(chart, initial)
    eps0 = squared_speed(chart, initial)
    omega = float(cyclotron_omega(particle, field, chart, eps0))
    n, h_eff = _steps_for(h, T)

    start = time.perf_counter()
    ys, count, status = _rk4_kernel(
        initial.as_array(), h_eff, n, float(chart.kappa), chart.rho, omega,
        AXIS_GUARD * chart.rho, True,
    )
    wall = time.perf_counter() - start
    y = np.ascontiguousarray(ys[:count])
    t = initial.t + h_eff * np.arange(count)
    status_name = "ok" if status == OK else _HALT_REASONS[status]
    traj = _finish(chart, particle, field, t, y, omega, h_eff, wall, status_name)
    if status != OK:
        raise IntegrationHalted(status_name, traj)
    return traj


def propagate(chart: SpaceChart, omega: float, initial: State, h: float, n: int) -> State:
    """Take ``n`` RK4 steps of signed size ``h`` and return only the end state.

    Negative ``h`` integrates backwards in time, which is what the
    time-reversal check needs; nothing but the final state is stored.
    """
    ys, count, status = _rk4_kernel(
        initial.as_array(), float(h), int(n), float(chart.kappa), chart.rho,
        float(omega), AXIS_GUARD * chart.rho, False,
    )
    if status != OK:
        raise DomainError(f"propagation halted: {_HALT_REASONS[status]}")
    return State.from_array(ys[count - 1], initial.t + n * h)


def step_halving(
    chart: SpaceChart,
    particle: ParticleParams,
    field: FieldParams,
    initial: State,
    h: float,
    T: float,
):
    """End states at steps h and h/2 and the Richardson error estimate.

    For a fourth-order method the error of the h/2 run is about
    ``|y_h - y_h2| / 15``.
    """
    eps0 = squared_speed(chart, initial)
    omega = float(cyclotron_omega(particle, field, chart, eps0))
    n, h_eff = _steps_for(h, T)
    coarse = propagate(chart, omega, initial, h_eff, n).as_array()
    fine = propagate(chart, omega, initial, h_eff / 2, 2 * n).as_array()
    return coarse, fine, np.abs(coarse - fine) / 15.0
