"""Exception types shared across the simulator."""


class XbarSimError(Exception):
    """Base class for all simulator errors."""


class ShapeError(XbarSimError, ValueError):
    """Array dimensions do not match the operation's contract."""


class RangeError(XbarSimError, ValueError):
    """A value lies outside its physically representable range."""


class ParameterError(XbarSimError, ValueError):
    """A configuration parameter violates its invariants."""


class PresetError(XbarSimError, KeyError):
    """Unknown device preset name."""

    def __str__(self):  # KeyError quotes its args; we want the plain message
        return self.args[0] if self.args else ""


class SolverError(XbarSimError, RuntimeError):
    """The circuit solver failed or exceeded its residual bound."""


class TrainingError(XbarSimError, RuntimeError):
    """Training diverged or was configured inconsistently."""


class UnsupportedSchemeError(XbarSimError, ValueError):
    """Operation requires a different weight-to-conductance scheme."""


class ConfigError(XbarSimError, ValueError):
    """Experiment configuration failed to parse or validate."""


class DataError(XbarSimError, ValueError):
    """Dataset file could not be parsed."""
