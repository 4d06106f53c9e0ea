import math

import numpy as np
import pytest

from curved_larmor import ParticleParams, SpaceChart, State
from curved_larmor.geometry import ktrig

H3 = SpaceChart(kappa=-1, rho=1.0, c=1.0)
S3 = SpaceChart(kappa=1, rho=1.0, c=1.0)
UNIT_PARTICLE = ParticleParams(mass=1.0, charge=1.0)
GENERIC = State(r=0.7, phi=0.3, z=0.1, vr=0.1, vphi=0.15, vz=0.2)


def state_with_speed(chart, r, z, eps, direction, phi=0.0):
    """State at (r, phi, z) whose squared speed is ``eps``, moving along ``direction``.

    ``direction`` is an orthonormal-frame vector (radial, azimuthal, axial).
    """
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    speed = math.sqrt(eps)
    sr, _ = ktrig(chart, r)
    _, cz = ktrig(chart, z)
    return State(
        r=r, phi=phi, z=z,
        vr=speed * n[0] / cz,
        vphi=speed * n[1] / (cz * chart.rho * sr),
        vz=speed * n[2],
    )


def random_states(chart, n, seed, eps=(0.05, 0.9), r=(0.2, 2.0), z=(-1.0, 1.0)):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        out.append(state_with_speed(
            chart,
            r=rng.uniform(*r) * chart.rho,
            z=rng.uniform(*z) * chart.rho,
            eps=rng.uniform(*eps) * chart.c ** 2,
            direction=rng.normal(size=3),
            phi=rng.uniform(-math.pi, math.pi),
        ))
    return out


@pytest.fixture
def h3():
    return H3


@pytest.fixture
def s3():
    return S3


def run_with_omega(chart, state, omega, h=1e-3, T=20.0):
    """Integrate ``state`` in the field that yields cyclotron frequency ``omega``."""
    from curved_larmor import integrate, squared_speed
    from curved_larmor.invariants import field_for_omega

    field = field_for_omega(UNIT_PARTICLE, chart, squared_speed(chart, state), omega)
    return integrate(chart, UNIT_PARTICLE, field, state, h=h, T=T)


HELIX_START = State(r=0.5, phi=0.3, z=0.1, vr=0.1, vphi=0.4, vz=0.2)


def helix_deviation(rho, T=10.0, h=1e-3, start=HELIX_START):
    """Sup-norm Cartesian distance between the curved run and the flat helix."""
    from curved_larmor import FieldParams, euclidean_reference, integrate

    field = FieldParams(1.0)
    traj = integrate(SpaceChart(rho=rho), UNIT_PARTICLE, field, start, h=h, T=T)
    flat = euclidean_reference(UNIT_PARTICLE, field, start, traj.t)
    dx = traj.r * np.cos(traj.phi) - flat.r * np.cos(flat.phi)
    dy = traj.r * np.sin(traj.phi) - flat.r * np.sin(flat.phi)
    dz = traj.z - flat.z
    return float(np.max(np.sqrt(dx * dx + dy * dy + dz * dz)))


# acceptance criterion number -> (passed, one-line detail); printed after the run
ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE[number] = (passed, f"{title}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}  {text}")
