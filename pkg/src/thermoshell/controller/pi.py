"""PI baseline with conditional-integration anti-windup, and relay autotuning."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..commands import ControlCommand


@dataclass(frozen=True)
class PiGains:
    kp: float  # degC command per degC error
    ki: float  # 1/s
    u_min: float = 12.0
    u_max: float = 77.0
    center: float | None = None  # None: midpoint of the bounds

    def __post_init__(self):
        if not (math.isfinite(self.kp) and math.isfinite(self.ki)):
            raise ValueError("PI gains must be finite")
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be below u_max")

    @property
    def bias(self):
        return 0.5 * (self.u_min + self.u_max) if self.center is None else self.center


def pi_step(gains, error, integral, dt=0.5, pump_voltage=0.0, tick_index=0):
    """One PI update.

    Returns ``(command, new_integral)``. The integral of the error is frozen
    whenever the unclamped output is beyond a bound and the error would push
    it further out.
    """
    trial = integral + error * dt
    raw = gains.bias + gains.kp * error + gains.ki * trial
    if (raw > gains.u_max and error > 0) or (raw < gains.u_min and error < 0):
        trial = integral
        raw = gains.bias + gains.kp * error + gains.ki * trial
    value = min(max(raw, gains.u_min), gains.u_max)
    cmd = ControlCommand(value, pump_voltage, tick_index, clamped=value != raw)
    return cmd, trial


@dataclass
class PiController:
    """Stateful wrapper around :func:`pi_step` for the scenario runner."""

    gains: PiGains
    tick: float = 0.5
    integral: float = 0.0

    def reset(self, command=None, measurement=None, setpoint=None):
        # bumpless start: integral chosen so the first output equals ``command``
        self.integral = 0.0
        if command is not None and self.gains.ki != 0:
            error = 0.0 if setpoint is None or measurement is None else setpoint - measurement["surface"]
            self.integral = (command - self.gains.bias - self.gains.kp * error) / self.gains.ki

    def update(self, tick_index, measurement, window, pump_voltage):
        error = float(window[0]) - measurement["surface"]
        cmd, self.integral = pi_step(self.gains, error, self.integral, self.tick, pump_voltage, tick_index)
        return cmd, None


@dataclass(frozen=True)
class RelayResult:
    ultimate_gain: float
    ultimate_period: float
    amplitude: float
    gains: PiGains


def relay_autotune(plant, setpoint=40.0, relay_amplitude=20.0, center=None, tick=0.5, dt=0.05,
                   duration=900.0, cycles=4, pump_voltage=None):
    """Astrom-Hagglund relay experiment on the surface loop, Ziegler-Nichols PI rule.

    The relay switches the Peltier command between ``center +- relay_amplitude``
    on the sign of the surface error at each control tick. The ultimate gain is
    ``4 d / (pi a)`` from the last ``cycles`` full oscillations.
    """
    cfg = plant.config
    lo, hi = cfg.command_min, cfg.command_max
    v = cfg.pump.v_max if pump_voltage is None else pump_voltage
    if center is None:
        gain = float(plant.steady_state(cfg.ambient_temp + 1.0, plant.flow_for(v))[plant.idx["surface"]]
                     - plant.steady_state(cfg.ambient_temp, plant.flow_for(v))[plant.idx["surface"]])
        center = cfg.ambient_temp + (setpoint - cfg.ambient_temp) / gain
    d = min(relay_amplitude, center - lo, hi - center)
    state = plant.initial_state()
    state.temperatures[:] = plant.steady_state(center, plant.flow_for(v))
    sub = int(round(tick / dt))
    times, ys, switches = [], [], []
    high = True
    for k in range(int(round(duration / tick))):
        y = plant.temperature(state, "surface")
        times.append(k * tick)
        ys.append(y)
        want_high = y < setpoint
        if want_high != high:
            switches.append(k * tick)
            high = want_high
        cmd = ControlCommand(center + d if high else center - d, v)
        for _ in range(sub):
            state = plant.step(state, cmd, dt=dt)
    if len(switches) < 2 * cycles + 2:
        raise RuntimeError("relay experiment did not oscillate")
    t0 = switches[-2 * cycles - 1]
    period = (switches[-1] - t0) / cycles
    times = np.asarray(times)
    ys = np.asarray(ys)
    window = ys[times >= t0]
    a = 0.5 * (window.max() - window.min())
    ku = 4.0 * d / (math.pi * a)
    gains = PiGains(kp=0.45 * ku, ki=0.45 * ku / (period / 1.2), u_min=lo, u_max=hi,
                    center=cfg.ambient_temp)
    return RelayResult(ku, period, a, gains)
