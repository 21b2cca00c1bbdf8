"""Scenario configuration: sectioned ``key = value`` files with typed, validated keys.

Every key has a default, so an empty file is a valid scenario (the calibrated
plant holding ambient temperature). Several files can be layered; later files
override earlier ones key by key.
"""
from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field

from .errors import ConfigError

CALIBRATED = {  # shipped calibration result, see scenarios/calibrated.params
    "tank_volume": 9.466459749847083e-06,
    "water_wall": 1071.0114856362914,
    "surface_ambient": 23.3417201296897,
    "active_area": 0.028817033363757346,
}


@dataclass(frozen=True)
class Key:
    kind: str  # float | int | bool | str | floats | choice
    default: object
    doc: str
    lo: float | None = None
    hi: float | None = None
    choices: tuple = ()
    lo_open: bool = False


def _f(default, doc, lo=None, hi=None, lo_open=False):
    return Key("float", default, doc, lo, hi, lo_open=lo_open)


def _pos(default, doc, hi=None):
    return Key("float", default, doc, 0.0, hi, lo_open=True)


def _i(default, doc, lo=None, hi=None):
    return Key("int", default, doc, lo, hi)


def _b(default, doc):
    return Key("bool", default, doc)


def _s(default, doc):
    return Key("str", default, doc)


def _c(default, doc, *choices):
    return Key("choice", default, doc, choices=choices)


def _l(default, doc):
    return Key("floats", tuple(default), doc)


SCHEMA = {
    "materials": {
        **{f"{name}_{prop}": _pos(value, f"{name} {label}")
           for name, k, rho, c in (("gel", 0.37, 1200.0, 1500.0), ("foam", 0.04, 100.0, 1400.0),
                                    ("water", 0.604, 998.0, 4186.0), ("tpu", 0.20, 1200.0, 1800.0),
                                    ("coating", 0.20, 1200.0, 1800.0))
           for prop, value, label in (("conductivity", k, "thermal conductivity, W/(m K)"),
                                      ("density", rho, "density, kg/m^3"),
                                      ("specific_heat", c, "specific heat, J/(kg K)"))},
    },
    "geometry": {
        "gel_thickness": _pos(1e-3, "gel layer thickness, m"),
        "foam_thickness": _pos(6e-3, "foam layer thickness, m"),
        "channel_diameter": _pos(3e-3, "semicircular channel diameter, m"),
        "channel_pitch": _pos(10e-3, "channel spacing, m"),
        "active_area": _f(CALIBRATED["active_area"], "thermally active cover area, m^2", 0.005, 0.1),
        "channel_total_length": _f(0.0, "total channel length, m (0: active_area / channel_pitch)", 0.0),
        "tpu_thickness": _pos(400e-6, "channel liner thickness, m"),
        "coating_thickness": _pos(30e-6, "surface coating thickness, m"),
        "n_channel_cells": _i(10, "water cells along the channels", 1, 1000),
    },
    "loop": {
        "tube_inner_diameter": _pos(2.5e-3, "tube inner diameter, m"),
        "tube_length": _pos(1.46, "supply plus return tube length, m"),
        "tank_volume": _f(CALIBRATED["tank_volume"], "tank water volume, m^3", 5e-6, 5e-4),
        "n_tube_cells": _i(10, "water cells along the tubes (split supply/return)", 2, 1000),
        "water_wall_h": _f(CALIBRATED["water_wall"], "water-to-wall film coefficient, W/(m^2 K)", 1.0, 1e4),
        "surface_ambient_h": _f(CALIBRATED["surface_ambient"], "surface-to-ambient coefficient, W/(m^2 K)",
                                1.0, 1e4),
        "ambient_temp": _f(22.0, "room temperature, degC", -10.0, 50.0),
        "stratification_offset": _f(0.0, "upper/lower tank probe offset, K", 0.0, 20.0),
    },
    "peltier": {
        "mode": _c("command", "face model: command (first-order lag) or current (electrical)", "command",
                   "current"),
        "delta_t_max": _pos(72.0, "datasheet maximum temperature difference, K"),
        "q_max": _pos(77.1, "datasheet maximum heat pumping, W"),
        "v_max": _pos(15.7, "datasheet maximum voltage, V"),
        "i_max": _pos(8.5, "datasheet maximum current, A"),
        "hot_side_ref_temp": _pos(323.15, "datasheet hot-side reference temperature, K"),
        "face_area": _pos(1.6e-3, "face area, m^2"),
        "command_min": _f(12.0, "lowest face command, degC"),
        "command_max": _f(77.0, "highest face command, degC"),
        "unsafe": _b(False, "allow commands outside [12, 77] degC (face-pinning experiments only)"),
        "lag_time_constant": _pos(3.0, "face response time constant, s"),
        "sink_resistance": _pos(0.15, "heat-sink thermal resistance (current mode), K/W"),
        "inner_kp": _f(2.0, "current-mode face loop proportional gain, A/K", 0.0),
        "inner_ki": _f(0.5, "current-mode face loop integral gain, A/(K s)", 0.0),
    },
    "pump": {
        "v_min": _f(0.0, "lowest drive voltage, V", 0.0),
        "v_max": _pos(5.0, "highest drive voltage, V"),
        "q_max_ml_min": _pos(80.0, "flow at v_max, ml/min"),
        "deadband": _f(0.5, "voltage below which the pump stalls, V", 0.0),
        "mode": _c("schedule", "schedule (hysteresis on surface error), fixed, or mpc (joint optimization)",
                   "schedule", "fixed", "mpc"),
        "voltage": _f(5.0, "drive voltage in fixed mode, V", 0.0),
        "hysteresis_c": _pos(0.5, "error band for full-voltage pumping, degC"),
        "hold_fraction": _f(0.4, "holding voltage as a fraction of v_max", 0.0, 1.0),
        "release_fraction": _f(0.5, "fraction of the band at which full pumping is released", 0.0, 1.0),
    },
    "controller": {
        "kind": _c("mpc", "mpc, pi, open_loop, or pinned_faces (open-loop levels imposed on the faces)",
                   "mpc", "pi", "open_loop", "pinned_faces"),
        "tick": _pos(0.5, "control period, s"),
        "precondition_face": Key("float", math.nan, "start from the steady state at this face temperature, "
                                                    "degC (nan: start at ambient)"),
        "precondition_pump": _f(5.0, "pump voltage for the preconditioning steady state, V", 0.0),
        "open_loop_levels": _l((), "open-loop command levels, degC (empty: ambient)"),
        "open_loop_hold": _pos(1e9, "seconds per open-loop level"),
    },
    "mpc": {
        "horizon": _i(20, "control moves", 1, 200),
        "prediction_horizon": _i(240, "prediction ticks (last move held beyond the control horizon)", 1, 5000),
        "q": _f(1.0, "tracking weight", 0.0),
        "r": _pos(0.02, "input-move weight"),
        "rho": _f(0.0, "pump-use weight (joint mode)", 0.0),
        "order": _i(3, "reduced model order", 0, 6),
        "preview": _b(False, "use future setpoints of the profile"),
        "identification_step": _f(30.0, "command step for model identification, degC"),
        "identification_duration": _pos(300.0, "identification window, s"),
        "tol": _pos(1e-8, "projected-gradient stopping tolerance"),
        "max_iter": _i(500, "solver iteration cap", 1, 100000),
    },
    "pi": {
        "kp": _f(6.018, "proportional gain, degC/degC (relay-autotuned on the calibrated plant)"),
        "ki": _f(0.19005, "integral gain, 1/s (relay-autotuned on the calibrated plant)"),
        "center": Key("float", math.nan, "output at zero error and integrator, degC (nan: ambient)"),
        "autotune": _b(False, "re-run the relay experiment before the scenario"),
    },
    "profile": {
        "kind": _c("constant", "constant, step_sequence, square_wave or sine_wave", "constant",
                   "step_sequence", "square_wave", "sine_wave"),
        "levels": _l((), "step_sequence levels, degC"),
        "hold": _pos(60.0, "seconds per step_sequence level"),
        "start": _f(0.0, "profile start time, s", 0.0),
        "initial": _f(22.0, "setpoint before start, degC"),
        "low": _f(20.0, "square_wave low level, degC"),
        "high": _f(40.0, "square_wave high level, degC"),
        "mean": _f(22.0, "constant level or sine_wave mean, degC"),
        "amplitude": _f(0.0, "sine_wave amplitude, degC"),
        "period": _pos(120.0, "square/sine period, s"),
        "phase": _f(0.0, "square/sine phase shift, s"),
        "duration": _f(0.0, "run length, s (0: step sequence length or one period)", 0.0),
    },
    "disturbances": {
        "hand_start": _f(0.0, "hand contact start, s", 0.0),
        "hand_duration": _f(0.0, "hand contact length, s (0: none)", 0.0),
        "hand_area": _pos(0.005, "palm contact area, m^2"),
        "hand_skin_temp": _f(33.0, "skin temperature, degC", 20.0, 42.0),
        "hand_contact_conductance": _f(100.0, "skin-to-cover contact conductance, W/(m^2 K)", 0.0, 1e4),
        "ambient_shift_start": _f(0.0, "ambient step start, s", 0.0),
        "ambient_shift_duration": _f(0.0, "ambient step length, s (0: none)", 0.0),
        "ambient_shift_delta": _f(0.0, "ambient step size, K", -20.0, 20.0),
    },
    "integrator": {
        "dt": _pos(0.05, "integration step, s", 1.0),
        "scheme": _c("implicit", "implicit (Euler) or rk4", "implicit", "rk4"),
    },
    "calibration": {
        "file": _s("", "parameters file overriding tank volume, film coefficients and active area "
                       "(relative to the config file)"),
    },
    "capsense": {
        "stack": _c("foam_channels_gel_water", "layer stack", "naked", "foam", "foam_gel", "foam_channels_gel",
                    "foam_channels_gel_water"),
        "stream": _s("", "recorded t_s,raw CSV to replay (empty: synthetic)"),
        "duration": _pos(180.0, "synthetic stream length, s"),
        "rate": _pos(10.0, "synthetic sample rate, Hz"),
        "seed": _i(0, "noise seed", 0),
        "protocol": _c("none", "scripted contacts: none or grasp", "none", "grasp"),
        "quiet": _f(20.0, "contact-free lead-in and lead-out, s", 0.0),
        "touch": _pos(10.0, "grasp length, s"),
        "release": _pos(10.0, "gap between grasps, s"),
        "contact_level": _f(0.3, "reading during contact relative to the stack mean", 0.0, 1.0),
        "calibration_window": _pos(20.0, "recalibration window, s"),
        "threshold": _f(0.8, "contact threshold (normalized)", 0.0, 1.0),
        "debounce": _i(5, "samples below threshold before contact", 1, 10000),
        "cover_temperature": _f(22.0, "cover temperature, degC (has no effect on sensing)"),
        "flow": _f(0.0, "water flow, ml/min (has no effect on sensing)", 0.0),
    },
    "output": {
        "name": _s("scenario", "scenario name used for the output directory"),
        "record_every": _i(1, "telemetry row every n control ticks", 1, 100000),
        "diagnostics": _b(True, "write the per-tick MPC solver sidecar CSV"),
    },
}

SAFE_COMMAND = (12.0, 77.0)
PATH_KEYS = ("calibration.file", "capsense.stream")
UNSAFE_COMMAND = (-10.0, 100.0)


@dataclass
class ScenarioConfig:
    values: dict = field(default_factory=dict)  # section -> key -> typed value
    source: str | None = None  # directory for resolving relative paths

    def __post_init__(self):
        full = {sec: {k: spec.default for k, spec in keys.items()} for sec, keys in SCHEMA.items()}
        for sec, kv in self.values.items():
            full[sec].update(kv)
        self.values = full

    def __getitem__(self, item):
        sec, key = item.split(".", 1)
        return self.values[sec][key]

    def get(self, section, key):
        return self.values[section][key]

    def __eq__(self, other):
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        return _canonical(self.values) == _canonical(other.values)

    def resolve(self, path):
        if not path or os.path.isabs(path) or self.source is None:
            return path
        return os.path.join(self.source, path)


def _canonical(values):
    # nan compares unequal to itself; compare through the serialized form
    return {sec: {k: format_value(SCHEMA[sec][k], v) for k, v in kv.items()} for sec, kv in values.items()}


def format_value(spec, value):
    if spec.kind == "bool":
        return "true" if value else "false"
    if spec.kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if spec.kind == "float":
        return repr(float(value))
    return str(value)


def _convert(spec, raw, where):
    key, line = where
    text = raw.strip()
    try:
        if spec.kind == "float":
            value = float(text)
        elif spec.kind == "int":
            value = int(text)
        elif spec.kind == "bool":
            lowered = text.lower()
            if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(text)
            value = configparser.ConfigParser.BOOLEAN_STATES[lowered]
        elif spec.kind == "floats":
            value = tuple(float(v) for v in re.split(r"[,\s]+", text) if v)
        elif spec.kind == "choice":
            if text not in spec.choices:
                raise ConfigError(f"expected one of {spec.choices}, got {text!r}", key=key, line=line)
            value = text
        else:
            value = text
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as {spec.kind}", key=key, line=line) from None
    _check_range(spec, value, key, line)
    return value


def _check_range(spec, value, key, line=None):
    nums = value if spec.kind == "floats" else (value,) if spec.kind in ("float", "int") else ()
    for v in nums:
        if spec.kind == "float" and math.isnan(v) and spec.lo is None and spec.hi is None:
            continue
        if not math.isfinite(v):
            raise ConfigError(f"value {v} is not finite", key=key, line=line)
        if spec.lo is not None and (v < spec.lo or (spec.lo_open and v <= spec.lo)):
            op = ">" if spec.lo_open else ">="
            raise ConfigError(f"value {v} out of range: must be {op} {spec.lo}", key=key, line=line)
        if spec.hi is not None and v > spec.hi:
            raise ConfigError(f"value {v} out of range: must be <= {spec.hi}", key=key, line=line)


def _key_lines(text):
    """Map ``section.key`` to its 1-based line number by scanning raw lines."""
    lines = {}
    section = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault(section, n)
            continue
        if section is not None and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, 1)[0].strip().lower()
            lines[f"{section}.{key}"] = n
    return lines


def parse_text(text, source=None, base=None):
    """Parse config text on top of ``base`` (a ScenarioConfig) or defaults."""
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", line=exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(":")[-1].strip(), line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("syntax error: expected 'key = value'", line=line) from None
    lines = _key_lines(text)
    values = {sec: dict(kv) for sec, kv in (base.values if base is not None else {}).items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", key=section, line=lines.get(section))
        for key, raw in parser.items(section):
            name = f"{section}.{key}"
            if key not in SCHEMA[section]:
                raise ConfigError("unknown key", key=name, line=lines.get(name))
            value = _convert(SCHEMA[section][key], raw, (name, lines.get(name)))
            if name in PATH_KEYS and value and source is not None and not os.path.isabs(value):
                # anchor to the file that set it, so layering keeps the reference
                value = os.path.normpath(os.path.join(source, value))
            values.setdefault(section, {})[key] = value
    cfg = ScenarioConfig(values, source if source is not None else (base.source if base else None))
    validate(cfg, lines)
    return cfg


def parse_config(path, base=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_text(text, os.path.dirname(os.path.abspath(path)), base)


def parse_configs(paths):
    cfg = None
    for p in paths:
        cfg = parse_config(p, cfg)
    return cfg if cfg is not None else ScenarioConfig()


def validate(cfg, lines=None):
    """Cross-key checks that single-key ranges cannot express."""
    lines = lines or {}

    def fail(msg, key):
        raise ConfigError(msg, key=key, line=lines.get(key))

    lo, hi = UNSAFE_COMMAND if cfg["peltier.unsafe"] else SAFE_COMMAND
    for k in ("command_min", "command_max"):
        v = cfg[f"peltier.{k}"]
        if not lo <= v <= hi:
            fail(f"value {v} out of range: must lie in [{lo}, {hi}] degC"
                 + ("" if cfg["peltier.unsafe"] else " unless peltier.unsafe = true"), f"peltier.{k}")
    if not cfg["peltier.command_min"] < cfg["peltier.command_max"]:
        fail("command_min must be below command_max", "peltier.command_max")
    if not cfg["pump.v_min"] < cfg["pump.v_max"]:
        fail("v_min must be below v_max", "pump.v_max")
    if not cfg["pump.v_min"] <= cfg["pump.deadband"] < cfg["pump.v_max"]:
        fail("deadband must lie in [v_min, v_max)", "pump.deadband")
    if not cfg["pump.v_min"] <= cfg["pump.voltage"] <= cfg["pump.v_max"]:
        fail("fixed pump voltage outside [v_min, v_max]", "pump.voltage")
    if cfg["mpc.prediction_horizon"] < cfg["mpc.horizon"]:
        fail("prediction_horizon must be >= horizon", "mpc.prediction_horizon")
    tick, dt = cfg["controller.tick"], cfg["integrator.dt"]
    if abs(round(tick / dt) * dt - tick) > 1e-9 * tick:
        fail("controller.tick must be an integer multiple of integrator.dt", "integrator.dt")
    if cfg["pump.mode"] == "mpc" and cfg["controller.kind"] != "mpc":
        fail("pump.mode = mpc needs controller.kind = mpc", "pump.mode")
    if cfg["controller.kind"] == "pinned_faces":
        for v in cfg["controller.open_loop_levels"]:
            if not UNSAFE_COMMAND[0] <= v <= UNSAFE_COMMAND[1]:
                fail(f"pinned face level {v} outside [{UNSAFE_COMMAND[0]}, {UNSAFE_COMMAND[1]}] degC",
                     "controller.open_loop_levels")
    if cfg["profile.kind"] == "step_sequence" and not cfg["profile.levels"]:
        fail("step_sequence needs levels", "profile.levels")
    return cfg


def serialize(cfg):
    """Canonical text form; parsing it yields an equal config."""
    out = []
    for sec, keys in SCHEMA.items():
        out.append(f"[{sec}]")
        for k, spec in keys.items():
            out.append(f"{k} = {format_value(spec, cfg.values[sec][k])}")
        out.append("")
    return "\n".join(out)


def describe_keys():
    """One line per key: ``section.key (default) doc``."""
    return [f"{sec}.{k} = {format_value(spec, spec.default)}  # {spec.doc}"
            for sec, keys in SCHEMA.items() for k, spec in keys.items()]
