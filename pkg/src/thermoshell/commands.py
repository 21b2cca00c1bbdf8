from dataclasses import dataclass


@dataclass(frozen=True)
class ControlCommand:
    """One control tick's actuator request."""

    peltier_command: float  # degC, water-side face temperature
    pump_voltage: float  # V
    tick_index: int = 0
    clamped: bool = False
    fallback: bool = False
