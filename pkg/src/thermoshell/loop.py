"""Closed water circuit: pump map, plug-flow advection, transit times."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, UndefinedTransitError

ML_PER_MIN = 1e-6 / 60.0  # m^3/s


@dataclass(frozen=True)
class PumpMap:
    """Voltage-to-flow map of the micro pump (D200S, 80 ml/min max)."""

    v_min: float = 0.0
    v_max: float = 5.0
    q_max: float = 80.0 * ML_PER_MIN
    deadband: float = 0.5

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ConfigError("pump v_min must be below v_max", key="pump.v_max")
        if not self.q_max > 0:
            raise ConfigError("pump q_max must be > 0", key="pump.q_max")
        if not (self.v_min <= self.deadband < self.v_max):
            raise ConfigError("pump deadband must lie in [v_min, v_max)", key="pump.deadband")


def pump_flow(pump, voltage):
    """Volumetric flow in m^3/s for a drive voltage (clamped to the pump range)."""
    v = min(max(float(voltage), pump.v_min), pump.v_max)
    if v <= pump.deadband:
        return 0.0
    return pump.q_max * (v - pump.deadband) / (pump.v_max - pump.deadband)


@dataclass(frozen=True)
class WaterLoopState:
    segment_ids: tuple
    volumes: np.ndarray  # m^3
    temperatures: np.ndarray  # degC
    flow_rate: float = 0.0  # m^3/s

    def __post_init__(self):
        object.__setattr__(self, "volumes", np.asarray(self.volumes, dtype=float))
        object.__setattr__(self, "temperatures", np.asarray(self.temperatures, dtype=float))
        if not (len(self.segment_ids) == self.volumes.size == self.temperatures.size):
            raise ConfigError("segment ids, volumes and temperatures must have equal length")
        if np.any(self.volumes <= 0):
            raise ConfigError("water cell volumes must be > 0")
        if self.flow_rate < 0:
            raise ConfigError("flow rate must be >= 0")

    @property
    def cells(self):
        return list(zip(self.segment_ids, self.volumes.tolist(), self.temperatures.tolist()))

    def energy(self, rho_c=998.0 * 4186.0):
        """Thermal energy relative to 0 degC, J."""
        return float(rho_c * np.dot(self.volumes, self.temperatures))


def advect_temperatures(temperatures, volumes, displaced):
    """Donor-cell transport of ``displaced`` m^3 around the ring.

    Each substep moves at most the smallest cell volume, so every cell keeps
    a convex mix of its own and its upstream neighbour's water: energy is
    conserved and no temperature leaves the previous [min, max] envelope.
    """
    if displaced <= 0:
        return np.array(temperatures, dtype=float, copy=True)
    ratio = displaced / volumes.min()
    n_sub = max(1, math.ceil(ratio - 1e-9))
    frac = (displaced / n_sub) / volumes
    temps = np.array(temperatures, dtype=float, copy=True)
    for _ in range(n_sub):
        temps = temps + frac * (np.roll(temps, 1) - temps)
    return temps


def advect(state, dt):
    """Shift water along the ring by ``flow_rate * dt`` with mixing at cell boundaries."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    temps = advect_temperatures(state.temperatures, state.volumes, state.flow_rate * dt)
    return replace(state, temperatures=temps)


def mean_transit_time(loop, cover, flow_rate, segments=("tank", "tube", "channels")):
    """Time for one circuit volume (or the chosen segments) to pass at ``flow_rate``."""
    if not flow_rate > 0:
        raise UndefinedTransitError("transit time undefined at zero flow")
    volume = 0.0
    if "tank" in segments:
        volume += loop.tank_volume
    if "tube" in segments:
        volume += loop.tube_volume
    if "channels" in segments:
        volume += cover.channel_volume
    return volume / flow_rate
