"""Flat ``key = value`` scenario files.

One key per line, dotted namespaces mirroring :class:`ScenarioConfig`::

    base = pi_vs_delay:pi_delay     # optional: start from a registry entry
    t_end = 20.0
    controller.alpha = 100.0
    controller.theta = auto         # plant-derived default
    noise.seed = 3
    events = 2.0 reference_step 0.0155; 12.0 load_impulse -0.05
    plant.A = -333.35, -333.33, 0.015, 333.33; 1, 0, 0, 0; ...

Keys not given keep the base entry's values (or the field defaults without
``base``).  Numbers are SI units; floats are written with ``repr`` so a
dumped file re-loads to an identical config.  The plant is given either as
matrices (``plant.A``, ``plant.B``, ``plant.C``, ``plant.Doff``) or as
physical parameters (``plant.m``, ``plant.M``, ``plant.k`` ...), not both.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .sim.engine import ControllerParams, Event, EventTimeline, ScenarioConfig
from .sim.plant import Contact, Limits, NoiseModel
from .sim.scenarios import scenario_registry
from .ssm import ActuatorLag, LinearSSM, PhysicalParams


class ConfigError(ValueError):
    """Malformed file (with line number) or schema violation (with key)."""


_SECTIONS = {
    "actuator": ActuatorLag,
    "limits": Limits,
    "contact": Contact,
    "controller": ControllerParams,
    "noise": NoiseModel,
}
_TOP = {"name": "str", "label": "str", "dt": "float", "t_end": "float",
        "x0": "tuple[float, ...]", "f0": "float", "r0": "float", "events": "events"}
_MATRIX_KEYS = ("plant.A", "plant.B", "plant.C", "plant.Doff")
_PHYSICAL_KEYS = tuple(f"plant.{f.name}" for f in dataclasses.fields(PhysicalParams))


def _schema() -> dict[str, str]:
    s = dict(_TOP)
    for sec, cls in _SECTIONS.items():
        for f in dataclasses.fields(cls):
            s[f"{sec}.{f.name}"] = str(f.type)
    s["plant.A"] = "matrix"
    for k in _MATRIX_KEYS[1:]:
        s[k] = "tuple[float, ...]"
    for k in _PHYSICAL_KEYS:
        s[k] = "float"
    return s


SCHEMA = _schema()


# ------------------------------------------------------------ value codecs

def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt_floats(vals) -> str:
    return ", ".join(_fmt_float(v) for v in vals)


def _fmt(kind: str, value) -> str:
    if value is None:
        return "auto"
    if kind == "matrix":
        return "; ".join(_fmt_floats(row) for row in np.asarray(value))
    if kind == "events":
        return "; ".join(f"{_fmt_float(e.time)} {e.kind} {_fmt_float(e.value)}"
                         for e in value) or "none"
    if "tuple" in kind:
        return _fmt_floats(value)
    if "float" in kind:
        return _fmt_float(value)
    return str(value)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _parse(key: str, text: str):
    kind = SCHEMA[key]
    text = text.strip()
    try:
        if text == "auto":
            if "None" not in kind:
                raise ConfigError(f"{key}: 'auto' not allowed here")
            return None
        if kind == "matrix":
            return np.array([_parse_floats(row) for row in text.split(";")])
        if kind == "events":
            if text in ("", "none"):
                return EventTimeline()
            evs = []
            for item in text.split(";"):
                parts = item.split()
                if len(parts) not in (2, 3):
                    raise ValueError(f"event {item.strip()!r} is not 'time kind [value]'")
                evs.append(Event(float(parts[0]), parts[1],
                                 float(parts[2]) if len(parts) == 3 else 0.0))
            return EventTimeline(tuple(evs))
        if "tuple" in kind:
            return _parse_floats(text)
        if "float" in kind:
            return float(text)
        if kind.startswith("int"):
            return int(text)
        return text
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


# --------------------------------------------------------- flat <-> config

def to_flat(cfg: ScenarioConfig) -> dict[str, str]:
    """Every key of ``cfg`` as formatted strings, in schema order."""
    out = {k: _fmt(_TOP[k], getattr(cfg, k)) for k in _TOP}
    if isinstance(cfg.plant, PhysicalParams):
        for k in _PHYSICAL_KEYS:
            out[k] = _fmt_float(getattr(cfg.plant, k.split(".", 1)[1]))
    else:
        out["plant.A"] = _fmt("matrix", cfg.plant.A)
        for k in _MATRIX_KEYS[1:]:
            out[k] = _fmt_floats(getattr(cfg.plant, k.split(".", 1)[1]))
    for sec in _SECTIONS:
        obj = getattr(cfg, sec)
        for f in dataclasses.fields(obj):
            out[f"{sec}.{f.name}"] = _fmt(str(f.type), getattr(obj, f.name))
    return out


def _build_plant(vals: dict):
    if any(k in vals for k in _PHYSICAL_KEYS):
        return PhysicalParams(**{k.split(".", 1)[1]: vals[k] for k in _PHYSICAL_KEYS if k in vals})
    return LinearSSM(vals["plant.A"], vals["plant.B"], vals["plant.C"], vals["plant.Doff"])


def from_flat(values: dict[str, str], base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config from string values layered over ``base``."""
    for k in values:
        if k not in SCHEMA:
            raise ConfigError(f"unknown key {k!r}")
    given_phys = [k for k in values if k in _PHYSICAL_KEYS]
    given_mat = [k for k in values if k in _MATRIX_KEYS]
    if given_phys and given_mat:
        raise ConfigError(f"plant given both as matrices and as physical parameters "
                          f"({given_mat[0]!r}, {given_phys[0]!r})")
    merged = to_flat(base) if base is not None else {}
    if given_phys:
        for k in _MATRIX_KEYS:
            merged.pop(k, None)
    if given_mat:
        for k in _PHYSICAL_KEYS:
            merged.pop(k, None)
    merged.update(values)
    vals = {k: _parse(k, v) for k, v in merged.items()}

    kwargs = {}
    for k in _TOP:
        if k in vals:
            kwargs[k] = vals[k]
    if "name" not in kwargs:
        raise ConfigError("missing key 'name' (or a 'base' entry)")
    if any(k.startswith("plant.") for k in vals):
        try:
            kwargs["plant"] = _build_plant(vals)
        except KeyError as exc:
            raise ConfigError(f"missing plant key {exc.args[0]!r}") from None
    for sec, cls in _SECTIONS.items():
        sub = {k.split(".", 1)[1]: v for k, v in vals.items() if k.startswith(sec + ".")}
        if sub:
            try:
                kwargs[sec] = cls(**sub)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{sec}.*: {exc}") from None
    try:
        return ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def resolve_key(key: str) -> str:
    """Full dotted key for ``key``; a bare field name works when unambiguous."""
    if key in SCHEMA:
        return key
    hits = [k for k in SCHEMA if k.rsplit(".", 1)[-1] == key]
    if len(hits) == 1:
        return hits[0]
    if hits:
        raise ConfigError(f"ambiguous key {key!r}: one of {hits}")
    raise ConfigError(f"unknown key {key!r}")


def apply_overrides(cfg: ScenarioConfig, overrides) -> ScenarioConfig:
    """Apply ``key=value`` strings (short keys allowed)."""
    values = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        values[resolve_key(k.strip())] = v.strip()
    return from_flat(values, cfg) if values else cfg


# ------------------------------------------------------------- files

def registry_config(ref: str) -> ScenarioConfig:
    """``name`` or ``name:variant`` from the registry."""
    name, _, label = ref.partition(":")
    reg = scenario_registry()
    if name not in reg:
        raise ConfigError(f"unknown scenario {name!r}; known: {sorted(reg)}")
    sc = reg[name]
    try:
        return sc[label] if label else sc.config
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None


def parse_text(text: str) -> tuple[str | None, dict[str, str]]:
    """Split file text into the optional ``base`` and the raw key values."""
    base = None
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in values or (key == "base" and base is not None):
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key == "base":
            base = value
        elif key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        else:
            values[key] = value
    return base, values


def loads_config(text: str) -> ScenarioConfig:
    base, values = parse_text(text)
    return from_flat(values, registry_config(base) if base else None)


def load_config(path) -> ScenarioConfig:
    """Read a scenario file; errors name the line or the key at fault."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    return loads_config(path.read_text())


def dumps_config(cfg: ScenarioConfig) -> str:
    lines = [f"# scenario {cfg.name}/{cfg.label}"]
    lines += [f"{k} = {v}" for k, v in to_flat(cfg).items()]
    return "\n".join(lines) + "\n"


def dump_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg))


def load_plant(path):
    """Plant-only file: ``plant.*`` keys (matrices or physical parameters)."""
    _, values = parse_text(Path(path).read_text())
    extra = [k for k in values if not k.startswith("plant.")]
    if extra:
        raise ConfigError(f"plant file has non-plant key {extra[0]!r}")
    vals = {k: _parse(k, v) for k, v in values.items()}
    try:
        return _build_plant(vals)
    except KeyError as exc:
        raise ConfigError(f"missing plant key {exc.args[0]!r}") from None
