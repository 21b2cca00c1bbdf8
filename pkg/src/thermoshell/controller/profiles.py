"""Surface-temperature setpoint profiles."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

HARD_LIMITS = (12.0, 77.0)  # degC, actuator envelope
REACHABLE_BAND = (15.8, 66.6)  # degC, outside this a warning is issued
KINDS = ("step_sequence", "square_wave", "sine_wave", "constant")


class SetpointWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SetpointProfile:
    """Piecewise or periodic setpoint ``r(t)``.

    ``step_sequence``: ``levels[i]`` for ``t`` in ``[start + i*hold, start + (i+1)*hold)``,
    ``initial`` before ``start``, last level afterwards. ``square_wave``: ``low``
    for the first half period, then ``high``. ``sine_wave``: ``mean + amplitude*sin``.
    """

    kind: str = "constant"
    levels: tuple = ()
    hold: float = 60.0
    start: float = 0.0
    initial: float = 22.0
    low: float = 20.0
    high: float = 40.0
    mean: float = 22.0
    amplitude: float = 0.0
    period: float = 120.0
    phase: float = 0.0  # s

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown profile kind {self.kind!r}", key="profile.kind")
        if self.kind == "step_sequence" and not self.levels:
            raise ConfigError("step_sequence needs at least one level", key="profile.levels")
        if self.hold <= 0 or self.period <= 0:
            raise ConfigError("hold and period must be > 0", key="profile.period")
        values = self._extremes()
        if min(values) < REACHABLE_BAND[0] or max(values) > REACHABLE_BAND[1]:
            warnings.warn(f"setpoints {min(values):.3g}..{max(values):.3g} degC leave the reachable band "
                          f"{REACHABLE_BAND}", SetpointWarning, stacklevel=3)

    def _extremes(self):
        if self.kind == "step_sequence":
            return (self.initial,) + tuple(self.levels)
        if self.kind == "square_wave":
            return (self.low, self.high)
        if self.kind == "sine_wave":
            return (self.mean - abs(self.amplitude), self.mean + abs(self.amplitude))
        return (self.mean,)

    @property
    def duration(self):
        """Natural length: the full step sequence, or one period otherwise."""
        if self.kind == "step_sequence":
            return self.start + self.hold * len(self.levels)
        return self.period

    def raw(self, t):
        if self.kind == "constant":
            return self.mean
        if self.kind == "step_sequence":
            if t < self.start:
                return self.initial
            i = min(int((t - self.start) // self.hold), len(self.levels) - 1)
            return float(self.levels[i])
        phase = ((t - self.start + self.phase) % self.period) / self.period
        if self.kind == "square_wave":
            return self.low if phase < 0.5 else self.high
        return self.mean + self.amplitude * math.sin(2 * math.pi * phase)

    def value(self, t):
        return min(max(self.raw(t), HARD_LIMITS[0]), HARD_LIMITS[1])

    def window(self, t0, tick, n):
        """Setpoints at ``t0 + tick * j`` for ``j = 1..n``."""
        return np.array([self.value(t0 + tick * j) for j in range(1, n + 1)])

    def step_times(self):
        """Start of each level of a step sequence; empty for the other kinds."""
        if self.kind != "step_sequence":
            return []
        return [self.start + i * self.hold for i in range(len(self.levels))]


def heating_staircase(start_level=22.0, stop=51.0, increment=3.0, last_increment=5.0, hold=60.0):
    """Up-steps of ``increment`` from ``start_level``, ending with one ``last_increment`` step to ``stop``."""
    levels = []
    level = start_level
    while level + increment <= stop - last_increment + 1e-9:
        level += increment
        levels.append(round(level, 9))
    levels.append(stop)
    return SetpointProfile("step_sequence", tuple(levels), hold, initial=start_level)


def cooling_staircase(start_level=22.0, stop=17.0, decrement=1.0, hold=60.0):
    n = int(round((start_level - stop) / decrement))
    levels = tuple(round(start_level - decrement * (i + 1), 9) for i in range(n))
    return SetpointProfile("step_sequence", levels, hold, initial=start_level)
