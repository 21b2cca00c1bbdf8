"""Bang-bang pump schedule with hysteresis."""
from __future__ import annotations

from dataclasses import dataclass


def pump_schedule(error, hysteresis, high=False, v_max=5.0, hold_fraction=0.4, release_fraction=0.5):
    """Pump voltage for a tracking error, with a switching memory.

    Returns ``(voltage, high)``. Full voltage is selected once ``|error|``
    exceeds ``hysteresis``; it is released to the holding voltage only after
    ``|error|`` falls below ``release_fraction * hysteresis``. Anything in
    between keeps the previous mode.
    """
    if not hysteresis > 0:
        raise ValueError("hysteresis must be > 0")
    e = abs(error)
    if e > hysteresis:
        high = True
    elif e < release_fraction * hysteresis:
        high = False
    return (v_max if high else hold_fraction * v_max), high


@dataclass
class PumpScheduler:
    hysteresis: float = 0.5  # degC
    v_max: float = 5.0
    hold_fraction: float = 0.4
    release_fraction: float = 0.5
    high: bool = False
    switches: int = 0

    def __call__(self, error):
        before = self.high
        v, self.high = pump_schedule(error, self.hysteresis, self.high, self.v_max, self.hold_fraction,
                                     self.release_fraction)
        self.switches += int(before != self.high)
        return v

    @property
    def hold_voltage(self):
        return self.hold_fraction * self.v_max
