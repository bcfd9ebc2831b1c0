"""
Exception hierarchy shared by every levystep package.

The CLI maps these onto exit codes: ConfigParseError -> 2,
ConfigurationError -> 3, SimulationError -> 4.
"""

from typing import Any


class LevyStepError(Exception):
    pass


class ConfigurationError(LevyStepError, ValueError):
    """A parameter or precondition is invalid (raised before any simulation work)."""


class ConfigParseError(LevyStepError):
    """A config file could not be read or does not match the expected layout."""

    def __init__(self, path: str, message: str, line: int | None = None, field: str | None = None):
        self.path = path
        self.line = line
        self.field = field
        where = path
        if line is not None:
            where += f":{line}"
        if field is not None:
            where += f" [{field}]"
        super().__init__(f"{where}: {message}")


class SimulationError(LevyStepError):
    pass


class ImplicitStepError(SimulationError):
    """The implicit step did not converge after Newton and the fallback."""

    def __init__(self, message: str, diagnostics: Any = None):
        self.diagnostics = diagnostics
        super().__init__(message)


class SingularJacobianError(SimulationError):
    pass
