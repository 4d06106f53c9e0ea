"""Command-line front end.

Subcommands: simulate, compare, sweep, classify, maxwell-check, verify.
Exit codes: 0 success, 1 usage/config error, 2 runtime halt,
3 tolerance failure.

The environment variable CURVED_LARMOR_SEED is reserved for future
stochastic features and is currently ignored.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analytic as an
from .config import ConfigError, RunConfig, build, load_raw, parse_sweep
from .dynamics import IntegrationHalted, integrate
from .field import maxwell_residual, vector_potential_phi
from .invariants import motion_constants
from .output import (
    classify,
    fmt,
    is_onaxis,
    manifest_for,
    reverify,
    trajectory_table,
    write_manifest,
    write_table,
)

EXIT_OK, EXIT_USAGE, EXIT_HALT, EXIT_TOLERANCE = 0, 1, 2, 3


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> tuple[dict, RunConfig]:
    raw = load_raw(args.config, args.set or ())
    if args.format:
        raw["output.format"] = args.format
    return raw, build(raw)


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


# --- simulate -------------------------------------------------------------

def cmd_simulate(args) -> int:
    _, cfg = _config(args)
    out = _out_dir(args)
    status, code = "ok", EXIT_OK
    try:
        traj = integrate(cfg.chart, cfg.particle, cfg.field, cfg.initial, cfg.h, cfg.T)
    except IntegrationHalted as exc:
        traj, status, code = exc.trajectory, exc.reason, EXIT_HALT
        _err(str(exc))
    table = trajectory_table(traj, cfg.stride)
    name = f"trajectory.{cfg.fmt}"
    write_table(out / name, table, cfg.fmt)
    manifest = manifest_for(cfg, traj, table, {"trajectory": name}, status)
    write_manifest(out / "manifest.json", manifest)
    print(f"wrote {out / name} ({manifest['rows']} rows) and {out / 'manifest.json'}")
    for key, value in manifest["drift"].items():
        print(f"  drift {key:8s} {value:.3e}")
    return code


# --- compare --------------------------------------------------------------

def compare_run(cfg: RunConfig) -> dict:
    """Sup-norm deviations of the RK4 run from every applicable closed form."""
    chart = cfg.chart
    if chart.kappa != -1:
        raise ConfigError("chart.kappa", "closed-form comparison is only defined for H3")
    c = motion_constants(chart, cfg.particle, cfg.field, cfg.initial)
    onaxis = is_onaxis(c, chart) and c.A > 0
    want_phi = cfg.get("compare.phi")
    if want_phi and not onaxis:
        raise ConfigError(
            "compare.phi",
            f"closed forms for phi(t) exist only for on-axis motion (C = 0); this run has C = {c.C:.6g}",
        )
    traj = integrate(chart, cfg.particle, cfg.field, cfg.initial, cfg.h, cfg.T)
    s0 = cfg.initial
    tol = {k: cfg.get(f"compare.tol_{k}") for k in ("z", "vz", "orbit", "r", "phi", "vphi")}
    dev, notes = {}, []

    regime = an.forbidden_region(c, chart).regime
    if regime is an.ZRegime.MARGINAL:
        notes.append("epsilon == A: z closed form not used")
    else:
        t0, sign = an.fit_z_phase(c, chart, s0.z, s0.vz, s0.t)
        z, vz = an.z_closed_form(c, chart, traj.t, t0, sign)
        dev["z"] = float(np.max(np.abs(z - traj.z)))
        dev["vz"] = float(np.max(np.abs(vz - traj.vz)))

    cls = an.classify_orbit(c, chart) if c.omega != 0 else None
    if onaxis:
        r0 = an.circle_params(c, chart).r0
        dev["r"] = float(np.max(np.abs(traj.r - r0)))
        if want_phi and regime is not an.ZRegime.MARGINAL:
            phi_rel, _ = an.phi_closed_form_onaxis(c, chart, r0, s0.t, t0, 0.0)
            phi, vphi = an.phi_closed_form_onaxis(c, chart, r0, traj.t, t0, s0.phi - phi_rel)
            dev["phi"] = float(np.max(np.abs(phi - traj.phi)))
            dev["vphi"] = float(np.max(np.abs(vphi - traj.vphi)))
    elif cls is an.OrbitClass.BOUNDED_CIRCLE or cls is an.OrbitClass.UNBOUNDED:
        phi0 = an.orbit_phase(chart, s0, c)
        res = an.normalized_orbit_residual(chart, traj.r, traj.phi, c, phi0)
        dev["orbit"] = float(np.max(np.abs(res)))

    failed = sorted(k for k, v in dev.items() if not v <= tol[k])
    return {
        "constants": {"epsilon": c.epsilon, "omega": c.omega, "I": c.I, "A": c.A, "C": c.C},
        "z_regime": regime.value,
        "orbit_class": cls.value if cls else None,
        "deviations": dev,
        "tolerances": {k: tol[k] for k in dev},
        "failed": failed,
        "notes": notes,
        "drift": traj.drift,
    }


def cmd_compare(args) -> int:
    _, cfg = _config(args)
    try:
        report = compare_run(cfg)
    except IntegrationHalted as exc:
        _err(str(exc))
        return EXIT_HALT
    except (an.DegenerateError, an.MarginalCaseError) as exc:
        raise ConfigError("compare", str(exc)) from None
    if args.out:
        out = _out_dir(args)
        (out / "compare.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for key, value in report["deviations"].items():
        verdict = "FAIL" if key in report["failed"] else "ok"
        print(f"{key:6s} {value:.3e}  (tol {report['tolerances'][key]:.1e})  {verdict}")
    for note in report["notes"]:
        print(f"note: {note}")
    return EXIT_TOLERANCE if report["failed"] else EXIT_OK


# --- sweep ----------------------------------------------------------------

SWEEP_STATS = ("epsilon", "A", "I", "C", "omega", "z_regime", "orbit_class", "r0", "R",
               "drift_epsilon", "drift_I", "drift_A", "drift_C", "status")


def sweep_job(raw: dict) -> dict:
    """One grid point; failures are reported in the row, never raised."""
    row = dict.fromkeys(SWEEP_STATS)
    try:
        cfg = build(raw)
        c = motion_constants(cfg.chart, cfg.particle, cfg.field, cfg.initial)
        row.update(epsilon=c.epsilon, A=c.A, I=c.I, C=c.C, omega=c.omega)
        summary = classify(cfg.chart, c, cfg.initial)
        row["z_regime"] = summary["z_regime"]
        row["orbit_class"] = summary["orbit_class"]
        if summary["circle"]:
            row["r0"], row["R"] = summary["circle"]["r0"], summary["circle"]["R"]
        try:
            traj = integrate(cfg.chart, cfg.particle, cfg.field, cfg.initial, cfg.h, cfg.T)
            row["status"] = "ok"
        except IntegrationHalted as exc:
            traj = exc.trajectory
            row["status"] = f"halted: {exc.reason}"
        for name in ("epsilon", "I", "A", "C"):
            row[f"drift_{name}"] = traj.drift[name]
    except Exception as exc:  # noqa: BLE001 - recorded per row by contract
        row["status"] = f"failed: {exc}"
    return row


def sweep_rows(raw: dict, jobs: int = 1) -> tuple[list, list]:
    """Evaluate every grid point; rows come back in grid order whatever ``jobs`` is."""
    axes = parse_sweep(raw)
    if not axes:
        raise ConfigError("sweep", "no sweep.<key>=start:stop:count entries given")
    base = {k: v for k, v in raw.items() if not k.startswith("sweep.")}
    points = list(itertools.product(*(axis.values for axis in axes)))
    job_raws = []
    for point in points:
        job = dict(base)
        for axis, value in zip(axes, point):
            job[axis.key] = repr(value)
        job_raws.append(job)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(sweep_job, job_raws))
    else:
        results = [sweep_job(job) for job in job_raws]
    names = [axis.key for axis in axes]
    rows = [dict(zip(names, point), **res) for point, res in zip(points, results)]
    return names + list(SWEEP_STATS), rows


def cmd_sweep(args) -> int:
    raw = load_raw(args.config, args.set or ())
    if args.format:
        raw["output.format"] = args.format
    fmt_name = raw.get("output.format", "csv")
    if fmt_name not in ("csv", "json"):
        raise ConfigError("output.format", "must be csv or json")
    columns, rows = sweep_rows(raw, args.jobs)
    out = _out_dir(args)
    table = {k: [row[k] for row in rows] for k in columns}
    name = f"sweep.{fmt_name}"
    write_table(out / name, table, fmt_name)
    flagged = sum(1 for row in rows if row["status"] != "ok")
    print(f"wrote {out / name}: {len(rows)} rows, {flagged} flagged")
    return EXIT_OK


# --- classify / maxwell-check / verify --------------------------------------

def cmd_classify(args) -> int:
    _, cfg = _config(args)
    c = motion_constants(cfg.chart, cfg.particle, cfg.field, cfg.initial)
    summary = classify(cfg.chart, c, cfg.initial)
    text = json.dumps(summary, indent=2, sort_keys=True)
    print(text)
    if args.out:
        (_out_dir(args) / "classify.json").write_text(text + "\n")
    return EXIT_OK


def cmd_maxwell(args) -> int:
    _, cfg = _config(args)
    v = cfg.values
    grid = np.linspace(v["maxwell.r_min"], v["maxwell.r_max"], v["maxwell.n"])
    bump = v["maxwell.perturb"]

    def potential(r):
        return vector_potential_phi(cfg.chart, cfg.field, r) + bump * r ** 2

    try:
        residual = maxwell_residual(cfg.chart, cfg.field, grid, v["maxwell.z"], potential)
    except ValueError as exc:
        raise ConfigError("maxwell", str(exc)) from None
    ok = residual <= v["maxwell.tol"]
    print(f"maxwell residual {fmt(residual)} (tol {v['maxwell.tol']:.1e}) {'ok' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_verify(args) -> int:
    try:
        gaps = reverify(args.out or ".")
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError("--out", f"cannot re-verify run directory: {exc}") from None
    print(json.dumps(gaps, indent=2))
    ok = gaps["invariant_column_gap"] <= 1e-12 and gaps["drift_gap"] <= 1e-12
    return EXIT_OK if ok else EXIT_TOLERANCE


COMMANDS = {
    "simulate": (cmd_simulate, "integrate one trajectory and write CSV + manifest"),
    "compare": (cmd_compare, "compare the integrator against closed-form solutions"),
    "sweep": (cmd_sweep, "run a one- or two-parameter grid and tabulate classifications"),
    "classify": (cmd_classify, "print integrals, z regime and orbit class of the initial state"),
    "maxwell-check": (cmd_maxwell, "evaluate the Maxwell-equation residual of the potential"),
    "verify": (cmd_verify, "re-check a simulate output directory against its manifest"),
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; 2 is reserved for runtime halts here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="curved-larmor",
        description="Charged-particle motion in a uniform-field analog on H3 / S3.",
        epilog="CURVED_LARMOR_SEED is reserved for future stochastic features and currently unused.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="key=value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a key (repeatable)")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), help="trajectory/table file format")
        p.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel sweep workers")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
