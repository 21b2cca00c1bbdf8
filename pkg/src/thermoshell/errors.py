"""Exception hierarchy.

Each class carries the CLI exit code it maps to.
"""


class ThermoShellError(Exception):
    exit_code = 1


class ConfigError(ThermoShellError, ValueError):
    """Invalid configuration: missing material, bad key, out-of-range value."""

    exit_code = 2

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DegenerateSpecError(ConfigError):
    """Peltier datasheet maxima that cannot define a device."""


class ActuationLimitError(ThermoShellError, ValueError):
    exit_code = 3


class InvariantViolation(ThermoShellError):
    exit_code = 3


class IntegrationError(ThermoShellError, ArithmeticError):
    """Non-finite or out-of-envelope temperature during stepping."""

    exit_code = 4

    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)


class EstimationError(ThermoShellError, ValueError):
    exit_code = 4


class UndefinedTransitError(ThermoShellError, ValueError):
    exit_code = 4


class IdentificationError(ThermoShellError):
    exit_code = 4

    def __init__(self, message, residual_rms=None):
        self.residual_rms = residual_rms
        super().__init__(message)


class CalibrationError(ThermoShellError):
    exit_code = 4

    def __init__(self, message, residuals=None):
        self.residuals = residuals or {}
        super().__init__(message)


class CalibrationRejected(ThermoShellError, ValueError):
    """Capacitive baseline window looks contaminated by contact."""

    exit_code = 4
