"""Thermoelectric faces of the double-faced tank."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ActuationLimitError, ConfigError, DegenerateSpecError

KELVIN = 273.15


@dataclass(frozen=True)
class PeltierSpecs:
    """Datasheet maxima of one module (ETH-127-14-11-S by default)."""

    delta_t_max: float = 72.0  # K
    q_max: float = 77.1  # W
    v_max: float = 15.7  # V
    i_max: float = 8.5  # A
    hot_side_ref_temp: float = 323.15  # K
    face_area: float = 40e-3 * 40e-3  # m^2

    def __post_init__(self):
        for name in ("delta_t_max", "q_max", "v_max", "i_max", "hot_side_ref_temp", "face_area"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"Peltier spec {name} must be > 0, got {value}", key=f"peltier.{name}")


@dataclass(frozen=True)
class PeltierParams:
    seebeck: float  # V/K
    resistance: float  # ohm
    thermal_conductance: float  # W/K
    i_max: float = 8.5  # A
    command_min: float = 12.0  # degC
    command_max: float = 77.0  # degC
    lag_time_constant: float = 3.0  # s, inner temperature loop of command mode

    def __post_init__(self):
        if not (self.seebeck > 0 and self.resistance > 0 and self.thermal_conductance > 0):
            raise ConfigError("seebeck, resistance and thermal_conductance must be > 0")
        if not self.command_min < self.command_max:
            raise ConfigError("command_min must be below command_max", key="peltier.command_min")
        if not self.lag_time_constant > 0:
            raise ConfigError("lag time constant must be > 0", key="peltier.lag_tau")


def derive_peltier_coefficients(specs, command_min=12.0, command_max=77.0, lag_time_constant=3.0):
    """Identify Seebeck coefficient, resistance and conductance from maxima.

    Uses the usual max-spec relations evaluated at the hot-side reference
    temperature ``T_h``::

        S = V_max / T_h
        R = V_max (T_h - dT_max) / (I_max T_h)
        K = V_max I_max (T_h - dT_max) / (2 T_h dT_max)
    """
    th, dtm = specs.hot_side_ref_temp, specs.delta_t_max
    if dtm >= th:
        raise DegenerateSpecError(f"delta_t_max ({dtm} K) must be below hot-side reference ({th} K)",
                                  key="peltier.delta_t_max")
    seebeck = specs.v_max / th
    resistance = specs.v_max * (th - dtm) / (specs.i_max * th)
    conductance = specs.v_max * specs.i_max * (th - dtm) / (2.0 * th * dtm)
    return PeltierParams(seebeck, resistance, conductance, specs.i_max,
                         command_min, command_max, lag_time_constant)


def face_heat_flows(params, current, t_cold, t_hot):
    """Heat absorbed at the cold face and released at the hot face, in W.

    Temperatures are in degC; ``current`` in A drives heat from the cold to
    the hot face. Returns ``(q_cold, q_hot)``; ``q_hot - q_cold`` is the
    electrical input ``I * (S (T_h - T_c) + I R)``.
    """
    if abs(current) > params.i_max * (1.0 + 1e-12):
        raise ActuationLimitError(f"|current| {abs(current):.4g} A exceeds i_max {params.i_max} A")
    s, r, k = params.seebeck, params.resistance, params.thermal_conductance
    tc, th = t_cold + KELVIN, t_hot + KELVIN
    back = k * (th - tc)
    joule = 0.5 * current * current * r
    q_cold = s * current * tc - joule - back
    q_hot = s * current * th + joule - back
    return q_cold, q_hot


def device_voltage(params, current, t_cold, t_hot):
    return params.seebeck * (t_hot - t_cold) + current * params.resistance


def clamp_command(params, command):
    """Clip a face-temperature command to the actuator envelope."""
    clipped = min(max(command, params.command_min), params.command_max)
    return clipped, clipped != command


def command_mode_step(params, face_temp, command, dt):
    """Advance a face temperature toward its (clamped) command.

    Exact first-order lag: ``T + (u - T)(1 - exp(-dt/tau))``, so the face never
    overshoots the command.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    target, _ = clamp_command(params, command)
    return target + (face_temp - target) * math.exp(-dt / params.lag_time_constant)
