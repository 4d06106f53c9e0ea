"""Trajectory files, run manifests and their re-verification."""

from __future__ import annotations

import datetime as _dt
import json
import math
from pathlib import Path

import numpy as np

from . import analytic as an
from .dynamics import INVARIANT_NAMES, Trajectory, drift_from_invariants, sample_invariants
from .geometry import SpaceChart, embed_arrays
from .invariants import MotionConstants

CSV_COLUMNS = ("t", "r", "phi", "z", "vr", "vphi", "vz", "epsilon", "I", "A", "C", "u0", "u1", "u2", "u3")
VOLATILE_KEY = "volatile"
ONAXIS_TOL = 1e-10


def fmt(x) -> str:
    return format(float(x), ".17g")


def row_indices(n: int, stride: int) -> np.ndarray:
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def trajectory_table(traj: Trajectory, stride: int) -> dict:
    idx = row_indices(len(traj), stride)
    y = traj.y[idx]
    u = embed_arrays(traj.chart, y[:, 0], y[:, 1], y[:, 2])
    cols = [traj.t[idx], *(y[:, j] for j in range(6)),
            *(traj.invariants[name][idx] for name in INVARIANT_NAMES), *u]
    return dict(zip(CSV_COLUMNS, cols))


def write_table(path: Path, table: dict, fmt_name: str = "csv") -> None:
    """Write columns to CSV (17 significant digits) or to JSON records."""
    keys = list(table)
    n = len(next(iter(table.values()))) if table else 0
    if fmt_name == "json":
        records = [{k: _json_value(table[k][i]) for k in keys} for i in range(n)]
        path.write_text(json.dumps(records, indent=1) + "\n")
        return
    lines = [",".join(keys)]
    for i in range(n):
        lines.append(",".join(_csv_cell(table[k][i]) for k in keys))
    path.write_text("\n".join(lines) + "\n")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return fmt(v)


def _json_value(v):
    if v is None or isinstance(v, str):
        return v
    v = float(v)
    return v if math.isfinite(v) else None


def read_csv(path: Path) -> dict:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    return {k: data[:, j] for j, k in enumerate(header)}


def _constants_dict(c: MotionConstants) -> dict:
    return {"epsilon": c.epsilon, "omega": c.omega, "I": c.I, "A": c.A, "C": c.C}


def is_onaxis(c: MotionConstants, chart: SpaceChart, tol: float = ONAXIS_TOL) -> bool:
    return c.C <= tol * max(c.A, (c.omega * chart.rho) ** 2, 1e-300)


def classify(chart: SpaceChart, c: MotionConstants, initial=None) -> dict:
    """Regime, orbit class and orbit geometry as JSON-ready values."""
    out = {"constants": _constants_dict(c), "z_regime": None, "orbit_class": None,
           "z_bounds": None, "circle": None, "turning_points": None}
    if chart.kappa != -1:
        out["note"] = "closed-form classification is available for H3 only"
        return out
    if c.epsilon > 0:
        fr = an.forbidden_region(c, chart)
        out["z_regime"] = fr.regime.value
        if fr.z_plus is not None:
            out["z_bounds"] = [fr.z_minus, fr.z_plus]
    if c.omega == 0:
        return out
    cls = an.classify_orbit(c, chart)
    out["orbit_class"] = cls.value
    if cls is an.OrbitClass.BOUNDED_CIRCLE:
        phi0 = None
        if initial is not None and not is_onaxis(c, chart):
            phi0 = an.orbit_phase(chart, initial, c)
        g = an.circle_params(c, chart, phi0 if phi0 is not None else 0.0)
        out["circle"] = {"r0": g.r0, "R": g.R, "phi0": phi0}
    if c.A > 0 and cls is not an.OrbitClass.MARGINAL_HOROCYCLIC:
        r_min, r_max = an.radial_turning_points(c, chart)
        out["turning_points"] = [r_min, r_max if math.isfinite(r_max) else None]
    return out


def run_checks(traj: Trajectory, c: MotionConstants, table: dict) -> dict:
    chart = traj.chart
    rho2 = chart.rho ** 2
    u0, u1, u2, u3 = (table[k] for k in ("u0", "u1", "u2", "u3"))
    spatial = u1 ** 2 + u2 ** 2 + u3 ** 2
    quad = u0 ** 2 + spatial if chart.kappa == 1 else u0 ** 2 - spatial
    checks = {"embedding_max_rel_residual": float(np.max(np.abs(quad - rho2)) / rho2)}
    if chart.kappa != -1:
        return checks
    if is_onaxis(c, chart) and c.A > 0 and an.classify_orbit(c, chart) is an.OrbitClass.BOUNDED_CIRCLE:
        r0 = an.circle_params(c, chart).r0
        checks["onaxis"] = {"r0": r0, "max_abs_r_minus_r0": float(np.max(np.abs(traj.r - r0)))}
    if c.epsilon > 0:
        fr = an.forbidden_region(c, chart)
        if fr.regime is an.ZRegime.REFLECTED:
            bound = math.sqrt(c.A / c.epsilon - 1.0)
            low = float(np.min(np.abs(np.sinh(traj.z / chart.rho))))
            checks["forbidden_region"] = {"bound": bound, "min_abs_sinh_z": low,
                                          "holds": low >= bound - 1e-8}
    return checks


def manifest_for(config, traj: Trajectory, table: dict, outputs: dict, status: str) -> dict:
    c = traj.constants(0)
    summary = classify(traj.chart, c, traj.state(0))
    return {
        "format_version": 1,
        "command": "simulate",
        "config": {k: v for k, v in sorted(config.values.items())},
        "resolved": {
            "B": config.field.B,
            "initial": {k: getattr(traj.state(0), k) for k in ("t", "r", "phi", "z", "vr", "vphi", "vz")},
        },
        "omega": traj.omega,
        "h": traj.h,
        "method": traj.method,
        "status": status,
        "halted": status != "ok",
        "samples": len(traj),
        "rows": len(table["t"]),
        "classification": summary,
        "drift": traj.drift,
        "csv_drift": drift_from_invariants({k: table[k] for k in INVARIANT_NAMES}),
        "checks": run_checks(traj, c, table),
        "outputs": outputs,
        VOLATILE_KEY: {
            "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "wall_clock_s": traj.wall_clock,
        },
    }


def write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def stable_view(manifest: dict) -> dict:
    """Manifest without the fields that legitimately vary between runs."""
    return {k: v for k, v in manifest.items() if k != VOLATILE_KEY}


def reverify(out_dir) -> dict:
    """Recompute invariants and drifts from a run's CSV and compare with its manifest.

    Returns the largest discrepancies found; a faithful run gives zeros.
    """
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    traj_name = manifest["outputs"]["trajectory"]
    if not traj_name.endswith(".csv"):
        raise ValueError("re-verification reads CSV trajectories only")
    table = read_csv(out_dir / traj_name)
    cfg = manifest["config"]
    chart = SpaceChart(cfg["chart.kappa"], cfg["chart.rho"], cfg["chart.c"])
    y = np.column_stack([table[k] for k in ("r", "phi", "z", "vr", "vphi", "vz")])
    inv = sample_invariants(chart, table["t"], y, manifest["omega"])
    column_gap = max(float(np.max(np.abs(inv[k] - table[k]))) for k in INVARIANT_NAMES)
    drift = drift_from_invariants(inv)
    drift_gap = max(abs(drift[k] - manifest["csv_drift"][k]) for k in INVARIANT_NAMES)
    return {"invariant_column_gap": column_gap, "drift_gap": drift_gap, "rows": len(table["t"])}
