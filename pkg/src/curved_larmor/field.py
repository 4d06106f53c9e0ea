"""Axial magnetic field: gauge potential, field strength, Maxwell check."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import SpaceChart, ktrig


@dataclass(frozen=True)
class FieldParams:
    B: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.B):
            raise ValueError(f"B must be finite, got {self.B!r}")


def coupling_profile(chart: SpaceChart, r):
    """Flux function ``M(r) = -A_phi/B``, i.e. ``rho^2 (cosh - 1)`` on H3.

    On S3 this is ``rho^2 (1 - cos)``; both tend to ``r^2/2`` as rho grows.
    """
    _, cr = ktrig(chart, r)
    return -chart.kappa * chart.rho ** 2 * (cr - 1.0)


def vector_potential_phi(chart: SpaceChart, field: FieldParams, r):
    return -field.B * coupling_profile(chart, r)


def field_strength_phir(chart: SpaceChart, field: FieldParams, r):
    """``F_{phi r} = -dA_phi/dr = rho B S(r/rho)`` (``A_r = 0``)."""
    sr, _ = ktrig(chart, r)
    return chart.rho * field.B * sr


def sqrt_metric_det(chart: SpaceChart, r, z):
    """``sqrt(det g)`` of the spatial metric, ``rho C(z)^2 S(r)``."""
    sr, _ = ktrig(chart, r)
    _, cz = ktrig(chart, z)
    return chart.rho * cz ** 2 * sr


def maxwell_residual(
    chart: SpaceChart,
    field: FieldParams,
    r_grid: Sequence[float],
    z: float = 0.0,
    potential: Optional[Callable] = None,
    dr: Optional[float] = None,
) -> float:
    """Max |div F| of the static source-free Maxwell equation on ``r_grid``.

    ``potential`` maps an array of radii to ``A_phi`` (defaults to the
    field's own potential). The radial derivative of the potential uses a
    central difference with step ``dr``; the divergence uses
    ``np.gradient`` on the grid. The returned number is a diagnostic only.
    """
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 3:
        raise ValueError("maxwell_residual needs a 1-D grid with at least 3 points")
    if np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise ValueError("grid must be strictly increasing with r > 0")
    if chart.kappa == 1 and np.any(r >= math.pi * chart.rho):
        raise ValueError("grid leaves the S3 chart")
    if potential is None:
        def potential(x):
            return vector_potential_phi(chart, field, x)
    if dr is None:
        dr = 1e-2 * chart.rho

    f_rphi = (potential(r + dr) - potential(r - dr)) / (2.0 * dr)
    sr, _ = ktrig(chart, r)
    _, cz = ktrig(chart, z)
    g_rr = cz ** 2
    g_pp = chart.rho ** 2 * cz ** 2 * sr ** 2
    sqrt_g = sqrt_metric_det(chart, r, z)
    flux = sqrt_g * f_rphi / (g_rr * g_pp)
    residual = np.gradient(flux, r, edge_order=2) / sqrt_g
    return float(np.max(np.abs(residual)))
