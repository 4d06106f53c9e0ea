"""Flat ``key = value`` run configuration with dotted keys.

Lines starting with ``#`` are comments. ``--set key=value`` overrides are
applied after the file, in order. Keys beginning with ``sweep.`` describe a
parameter grid and are kept separate from the run keys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Iterable, Optional

from .analytic import onaxis_state, state_from_constants
from .field import FieldParams
from .geometry import DomainError, SpaceChart, State, check_domain
from .invariants import (
    InvalidStateError,
    ParticleParams,
    cyclotron_omega,
    field_for_omega,
    squared_speed,
)

INITIAL_MODES = ("state", "constants", "onaxis")

# key -> (type, default); default None means "optional, no value"
SCHEMA = {
    "chart.kappa": (int, -1),
    "chart.rho": (float, 1.0),
    "chart.c": (float, 1.0),
    "particle.m": (float, 1.0),
    "particle.e": (float, 1.0),
    "field.B": (float, 1.0),
    "field.omega": (float, None),
    "initial.mode": (str, "state"),
    "initial.t": (float, 0.0),
    "initial.r": (float, 0.7),
    "initial.phi": (float, 0.0),
    "initial.z": (float, 0.1),
    "initial.vr": (float, 0.1),
    "initial.vphi": (float, 0.15),
    "initial.vz": (float, 0.2),
    "initial.vr_sign": (int, 1),
    "initial.vz_sign": (int, 1),
    "constants.epsilon": (float, None),
    "constants.A": (float, None),
    "constants.I": (float, None),
    "onaxis.r0": (float, None),
    "integration.h": (float, 1e-3),
    "integration.T": (float, 20.0),
    "output.stride": (int, 10),
    "output.format": (str, "csv"),
    "compare.phi": (bool, False),
    "compare.tol_z": (float, 1e-6),
    "compare.tol_vz": (float, 1e-6),
    "compare.tol_orbit": (float, 1e-7),
    "compare.tol_r": (float, 1e-8),
    "compare.tol_phi": (float, 1e-6),
    "compare.tol_vphi": (float, 1e-6),
    "maxwell.r_min": (float, 0.5),
    "maxwell.r_max": (float, 2.0),
    "maxwell.n": (int, 200),
    "maxwell.z": (float, 0.0),
    "maxwell.perturb": (float, 0.0),
    "maxwell.tol": (float, 1e-10),
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key: str, text: str):
    kind = SCHEMA[key][0]
    try:
        if kind is bool:
            return _parse_bool(text)
        if kind is int:
            as_float = float(text)
            if not as_float.is_integer():
                raise ValueError(f"not an integer: {text!r}")
            return int(as_float)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError("must be finite")
            return value
        return text.strip()
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def parse_lines(lines: Iterable[str], source: str = "<config>") -> dict:
    raw = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{source}:{lineno}", f"expected key=value, got {line.strip()!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        raw[key] = value
    return raw


def load_raw(path: Optional[str] = None, overrides: Iterable[str] = ()) -> dict:
    raw = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        raw.update(parse_lines(text.splitlines(), str(p)))
    raw.update(parse_lines(overrides, "--set"))
    for key in raw:
        if key not in SCHEMA and not key.startswith("sweep."):
            raise ConfigError(key, "unknown configuration key")
    return raw


@dataclass(frozen=True)
class SweepAxis:
    key: str
    values: tuple

    @classmethod
    def parse(cls, key: str, text: str) -> "SweepAxis":
        target = key[len("sweep."):]
        if target not in SCHEMA or SCHEMA[target][0] is not float:
            raise ConfigError(key, "sweep target must be a numeric configuration key")
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(key, "expected start:stop:count")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(key, f"bad range {text!r}") from None
        if count < 1:
            raise ConfigError(key, "count must be >= 1")
        if count == 1:
            return cls(target, (start,))
        step = (stop - start) / (count - 1)
        # endpoints exact so boundary grid points land on the threshold
        values = tuple(start + i * step for i in range(count - 1)) + (stop,)
        return cls(target, values)


@dataclass(frozen=True)
class RunConfig:
    chart: SpaceChart
    particle: ParticleParams
    field: FieldParams
    initial: State
    h: float
    T: float
    stride: int
    fmt: str
    values: dict
    sweep: tuple = dc_field(default_factory=tuple)

    def get(self, key: str):
        return self.values[key]


def parse_sweep(raw: dict) -> tuple:
    axes = tuple(SweepAxis.parse(k, v) for k, v in raw.items() if k.startswith("sweep."))
    if len(axes) > 2:
        raise ConfigError("sweep", "at most two sweep parameters are supported")
    return axes


def resolve(raw: dict) -> dict:
    values = {}
    for key, (_, default) in SCHEMA.items():
        values[key] = _convert(key, raw[key]) if key in raw else default
    return values


def _require(values: dict, key: str):
    if values[key] is None:
        raise ConfigError(key, f"required when initial.mode={values['initial.mode']}")
    return values[key]


def build(raw: dict) -> RunConfig:
    """Validate ``raw`` and construct the physical objects of one run."""
    values = resolve(raw)
    try:
        chart = SpaceChart(values["chart.kappa"], values["chart.rho"], values["chart.c"])
    except ValueError as exc:
        raise ConfigError("chart", str(exc)) from None
    try:
        particle = ParticleParams(values["particle.m"], values["particle.e"])
    except ValueError as exc:
        raise ConfigError("particle", str(exc)) from None

    mode = values["initial.mode"]
    if mode not in INITIAL_MODES:
        raise ConfigError("initial.mode", f"must be one of {INITIAL_MODES}")
    omega_target = values["field.omega"]
    try:
        if mode == "state":
            initial = State(
                r=values["initial.r"], phi=values["initial.phi"], z=values["initial.z"],
                vr=values["initial.vr"], vphi=values["initial.vphi"], vz=values["initial.vz"],
                t=values["initial.t"],
            )
            eps = squared_speed(chart, initial)
        else:
            eps = _require(values, "constants.epsilon")
            if omega_target is None:
                omega = cyclotron_omega(particle, FieldParams(values["field.B"]), chart, eps)
            else:
                omega = omega_target
            if mode == "constants":
                initial = state_from_constants(
                    chart, eps, omega,
                    A=_require(values, "constants.A"), I=_require(values, "constants.I"),
                    r=values["initial.r"], z=values["initial.z"], phi=values["initial.phi"],
                    vr_sign=values["initial.vr_sign"], vz_sign=values["initial.vz_sign"],
                    t=values["initial.t"],
                )
            else:
                initial = onaxis_state(
                    chart, eps, omega, _require(values, "onaxis.r0"),
                    z=values["initial.z"], phi=values["initial.phi"],
                    vz_sign=values["initial.vz_sign"], t=values["initial.t"],
                )
        check_domain(chart, initial)
        eps = squared_speed(chart, initial)
        if not eps < chart.c ** 2:
            raise InvalidStateError(f"initial squared speed {eps} is not below c^2")
        if omega_target is None:
            field = FieldParams(values["field.B"])
        else:
            field = field_for_omega(particle, chart, eps, omega_target)
    except (InvalidStateError, DomainError, NotImplementedError, ZeroDivisionError) as exc:
        raise ConfigError("initial", str(exc)) from None

    h, T, stride = values["integration.h"], values["integration.T"], values["output.stride"]
    if not h > 0:
        raise ConfigError("integration.h", "must be > 0")
    if not T > 0:
        raise ConfigError("integration.T", "must be > 0")
    if stride < 1:
        raise ConfigError("output.stride", "must be >= 1")
    if values["output.format"] not in ("csv", "json"):
        raise ConfigError("output.format", "must be csv or json")
    sweep = parse_sweep(raw)
    return RunConfig(
        chart=chart, particle=particle, field=field, initial=initial, h=h, T=T,
        stride=stride, fmt=values["output.format"], values=values, sweep=sweep,
    )
