"""Relativistic charged-particle motion in a uniform-field analog on H3 and S3."""

from .analytic import (
    OrbitClass,
    OrbitGeometry,
    ZRegime,
    circle_params,
    classify_orbit,
    euclidean_reference,
    forbidden_region,
    onaxis_constants,
    orbit_residual,
    phi_closed_form_onaxis,
    quadrature_phi_of_r,
    quadrature_r_of_z,
    radial_turning_points,
    z_closed_form,
)
from .dynamics import IntegrationHalted, Trajectory, accelerations, drift_report, first_order_rates, integrate
from .field import FieldParams, field_strength_phir, maxwell_residual, vector_potential_phi
from .geometry import Embedded, SpaceChart, State, circle_residual, embed, ktrig
from .invariants import (
    MotionConstants,
    ParticleParams,
    cyclotron_omega,
    invariant_A,
    invariant_C,
    invariant_C_direct,
    invariant_I,
    motion_constants,
    squared_speed,
)

__version__ = "0.1.0"
