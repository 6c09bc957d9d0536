"""Exception hierarchy."""


class NetPowerError(Exception):
    """Base class for all package errors."""


class ConfigError(NetPowerError, ValueError):
    """Invalid configuration or parameter value."""


class GraphFormatError(NetPowerError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class SelfLoopError(GraphFormatError):
    pass


class CalibrationError(NetPowerError, RuntimeError):
    pass


class DesignError(NetPowerError, ValueError):
    pass


class TiltImpossibleError(DesignError):
    """Degree tilt requested on a graph whose degrees do not vary."""


class UnsupportedDesignError(DesignError):
    pass


class UndefinedCorrelationError(NetPowerError, ValueError):
    pass


class PositivityError(NetPowerError, ValueError):
    """A realized exposure condition has zero probability under the design."""


class DegenerateError(NetPowerError, RuntimeError):
    """Not enough information to compute a statistic (empty group, zero variance)."""
