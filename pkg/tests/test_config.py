import math
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoshell.config import (CALIBRATED, SCHEMA, ScenarioConfig, describe_keys, format_value, parse_config,
                                parse_configs, parse_text, serialize)
from thermoshell.errors import ConfigError

SCENARIOS = os.path.join(os.path.dirname(__file__), os.pardir, "src", "thermoshell", "scenarios")


def scenario(name):
    return os.path.join(SCENARIOS, name)


def test_empty_file_gives_defaults():
    cfg = parse_text("")
    assert cfg == ScenarioConfig()
    assert cfg["peltier.command_max"] == 77.0
    assert cfg["loop.tank_volume"] == CALIBRATED["tank_volume"]


def test_every_key_documented():
    lines = describe_keys()
    assert len(lines) == sum(len(keys) for keys in SCHEMA.values())
    assert all("#" in line and line.split("#", 1)[1].strip() for line in lines)


def test_command_max_out_of_range():
    with pytest.raises(ConfigError) as info:
        parse_text("[peltier]\ncommand_max = 200\n")
    assert info.value.key == "peltier.command_max"
    assert info.value.line == 2


def test_unsafe_flag_widens_envelope():
    cfg = parse_text("[peltier]\nunsafe = true\ncommand_max = 87\n")
    assert cfg["peltier.command_max"] == 87.0
    with pytest.raises(ConfigError):
        parse_text("[peltier]\nunsafe = true\ncommand_max = 200\n")


def test_unknown_key_reports_line():
    text = "# header\n[mpc]\nhorizon = 10\n\nhorizn = 3\n"
    with pytest.raises(ConfigError) as info:
        parse_text(text)
    assert info.value.key == "mpc.horizn"
    assert info.value.line == 5


@pytest.mark.parametrize("text,line", [
    ("horizon = 3\n", 1),
    ("[mpc]\nhorizon\n", 2),
    ("[mpc]\nhorizon = 3\nhorizon = 4\n", 3),
    ("[mpc]\nhorizon = ten\n", 2),
    ("[nowhere]\nx = 1\n", 1),
    ("[controller]\nkind = fuzzy\n", 2),
])
def test_syntax_and_type_errors_are_line_numbered(text, line):
    with pytest.raises(ConfigError) as info:
        parse_text(text)
    assert info.value.line == line


def test_cross_key_checks():
    with pytest.raises(ConfigError) as info:
        parse_text("[integrator]\ndt = 0.3\n")
    assert info.value.key == "integrator.dt"
    with pytest.raises(ConfigError):
        parse_text("[mpc]\nhorizon = 50\nprediction_horizon = 40\n")
    with pytest.raises(ConfigError):
        parse_text("[controller]\nkind = pi\n[pump]\nmode = mpc\n")


def test_inline_comments():
    cfg = parse_text("[mpc]\nhorizon = 12  # shorter\n")
    assert cfg["mpc.horizon"] == 12


def test_fig6_heat():
    cfg = parse_config(scenario("fig6_heat.ini"))
    assert cfg["profile.kind"] == "step_sequence"
    assert cfg["profile.initial"] == 22.0
    levels = cfg["profile.levels"]
    assert levels == (25.0, 28.0, 31.0, 34.0, 37.0, 40.0, 43.0, 46.0, 51.0)
    assert all(b - a == 3.0 for a, b in zip(levels[:-2], levels[1:-1])) and levels[-1] - levels[-2] == 5.0
    assert cfg["profile.hold"] == 60.0


def test_layering_later_file_wins(tmp_path):
    extra = tmp_path / "extra.ini"
    extra.write_text("[profile]\nhold = 30\n[output]\nname = short\n")
    cfg = parse_configs([scenario("fig6_heat.ini"), str(extra)])
    assert cfg["profile.hold"] == 30.0
    assert cfg["profile.kind"] == "step_sequence"
    assert cfg["output.name"] == "short"


def test_relative_paths_resolve_against_the_file():
    cfg = parse_config(scenario("fig6_heat.ini"))
    assert os.path.isfile(cfg.resolve(cfg["calibration.file"]))


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/x.ini")


@pytest.mark.parametrize("name", sorted(n for n in os.listdir(SCENARIOS) if n.endswith(".ini")))
def test_shipped_scenarios_round_trip(name):
    cfg = parse_config(scenario(name))
    again = parse_text(serialize(cfg))
    assert again == cfg
    assert serialize(again) == serialize(cfg)


def _value_strategy(spec):
    if spec.kind == "float":
        lo = spec.lo if spec.lo is not None else -1e3
        hi = spec.hi if spec.hi is not None else 1e3
        return st.floats(lo, hi, exclude_min=spec.lo_open, allow_nan=False)
    if spec.kind == "int":
        return st.integers(int(spec.lo if spec.lo is not None else -100), int(spec.hi if spec.hi is not None else 100))
    if spec.kind == "bool":
        return st.booleans()
    if spec.kind == "choice":
        return st.sampled_from(spec.choices)
    return None


SIMPLE = [(sec, k) for sec, keys in SCHEMA.items() for k, spec in keys.items()
          if _value_strategy(spec) is not None and sec not in ("peltier", "pump", "integrator", "controller", "mpc")]


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_round_trip_property(data):
    sec, key = data.draw(st.sampled_from(SIMPLE))
    spec = SCHEMA[sec][key]
    value = data.draw(_value_strategy(spec))
    try:
        cfg = parse_text(f"[{sec}]\n{key} = {format_value(spec, value)}\n")
    except ConfigError:
        return  # a cross-key rule rejected it; nothing to round-trip
    assert parse_text(serialize(cfg)) == cfg
    got = cfg[f"{sec}.{key}"]
    assert got == value or (isinstance(value, float) and math.isclose(got, value, rel_tol=0, abs_tol=0))
