"""Flat ``key = value`` configuration with dotted sections.

Example::

    # controller and gains
    controller = invopt
    setpoint = 5, 5
    sim.dt = 1e-4
    mc.n_runs = 100

Blank lines and ``#`` comments are ignored.  Every key must appear in
:data:`SCHEMA`; unknown keys and bad values raise :class:`ConfigError` naming
the key.  Vector values are comma separated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .control import FblGains, SetPoint, SontagParams
from .experiments import MonteCarloConfig
from .model import CompensatorState, PlantParams, PlantState
from .sim import DEFAULT_DT, SimConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Key:
    kind: str  # float | int | str | bool | vec
    default: object
    check: Callable | None = None
    size: int | None = None  # for vec
    help: str = ""


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _all_pos(v):
    return all(x > 0 for x in v)


def _range(v):
    return 0 < v[0] <= v[1]


SCHEMA: dict[str, Key] = {
    "controller": Key("str", "invopt", lambda v: v in ("invopt", "fbl"), help="invopt | fbl"),
    "c0": Key("float", 1.0, _pos),
    "kx": Key("float", 1.0, _pos),
    "ky": Key("float", 1.0, _pos),
    "k0": Key("vec", FblGains().K0, size=4),
    "setpoint": Key("vec", (5.0, 5.0), size=2),
    "plant.epsilon": Key("float", 1.0, _nonneg),
    "plant.gravity": Key("float", 9.81, _pos),
    "sim.dt": Key("float", DEFAULT_DT, _pos),
    "sim.t_final": Key("float", 30.0, _pos),
    "sim.decimation": Key("int", 0, _nonneg, help="0 = automatic (100 Hz)"),
    "sim.delta": Key("vec", (1.0, 1.0), _all_pos, size=2),
    "initial.x": Key("float", 0.0),
    "initial.y": Key("float", 0.0),
    "initial.theta": Key("float", 0.0),
    "initial.xdot": Key("float", 0.0),
    "initial.ydot": Key("float", 0.0),
    "initial.thetadot": Key("float", 0.0),
    "initial.fhat": Key("float", math.nan, help="nan = hover thrust (gravity)"),
    "initial.fhatdot": Key("float", 0.0),
    "mc.n_runs": Key("int", 100, lambda v: v >= 1),
    "mc.delta_range": Key("vec", (0.2, 5.0), _range, size=2),
    "mc.fixed_delta": Key("vec", (), lambda v: len(v) in (0, 2) and _all_pos(v),
                          help="empty = sample; two values = force every run"),
    "mc.write_runs": Key("bool", False),
    "clf.n": Key("int", 25, lambda v: v >= 2),
    "clf.range": Key("vec", (0.2, 1.0e6), lambda v: 0 < v[0] < v[1], size=2),
    "zero.theta0": Key("float", 1e-3),
    "zero.thetadot0": Key("float", 0.0),
    "zero.duration": Key("float", 5.0, _pos),
    "zero.dt": Key("float", 1e-3, _pos),
    "output.dir": Key("str", "out"),
}


def _parse_value(key: str, raw: str):
    spec = SCHEMA[key]
    raw = raw.strip()
    try:
        if spec.kind == "float":
            val = float(raw)
        elif spec.kind == "int":
            val = int(raw)
        elif spec.kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            val = low in ("true", "1", "yes")
        elif spec.kind == "vec":
            val = tuple(float(p) for p in raw.split(",") if p.strip()) if raw else ()
            if spec.size is not None and len(val) != spec.size:
                raise ValueError(f"expected {spec.size} values")
        else:
            val = raw
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {spec.kind} ({exc})") from None
    numbers = val if spec.kind == "vec" else (val,) if spec.kind == "float" else ()
    nan_ok = key == "initial.fhat"  # nan selects hover thrust
    if any(not math.isfinite(v) and not (nan_ok and math.isnan(v)) for v in numbers):
        raise ConfigError(f"{key}: value must be finite, got {raw!r}")
    if spec.check is not None and not spec.check(val):
        raise ConfigError(f"{key}: invalid value {raw!r}" + (f" ({spec.help})" if spec.help else ""))
    return val


def parse_text(text: str, values: dict | None = None, source: str = "<config>") -> dict:
    values = dict(values or {})
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def apply_overrides(values: dict, overrides) -> dict:
    return parse_text("\n".join(overrides), values, source="--set")


def load(path=None, overrides=()) -> dict:
    """Defaults, then the file (if any), then ``--set`` overrides."""
    values = {k: spec.default for k, spec in SCHEMA.items()}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        values = parse_text(text, values, source=str(p))
    return apply_overrides(values, overrides)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def dump(values: dict) -> str:
    """Serialize an effective config; :func:`parse_text` restores it exactly."""
    return "".join(f"{k} = {_fmt(values[k])}\n" for k in SCHEMA if k in values)


def sim_config(values: dict) -> SimConfig:
    plant = PlantParams(epsilon=values["plant.epsilon"], gravity=values["plant.gravity"])
    fhat = values["initial.fhat"]
    comp = None if math.isnan(fhat) else CompensatorState(fhat, values["initial.fhatdot"])
    if comp is None and values["initial.fhatdot"] != 0.0:
        comp = CompensatorState(plant.gravity, values["initial.fhatdot"])
    try:
        return SimConfig(
            plant=plant,
            controller=values["controller"],
            kx=values["kx"],
            ky=values["ky"],
            sontag=SontagParams(c0=values["c0"]),
            fbl=FblGains(values["k0"]),
            setpoint=SetPoint(*values["setpoint"]),
            dt=values["sim.dt"],
            t_final=values["sim.t_final"],
            delta=values["sim.delta"],
            initial=PlantState(*(values[f"initial.{n}"] for n in PlantState._fields)),
            compensator=comp,
            decimation=values["sim.decimation"] or None,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def monte_carlo_config(values: dict, seed: int) -> MonteCarloConfig:
    return MonteCarloConfig(
        n_runs=values["mc.n_runs"],
        delta_range=values["mc.delta_range"],
        seed=seed,
        fixed_delta=values["mc.fixed_delta"] or None,
    )
