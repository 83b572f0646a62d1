"""Exception hierarchy shared by all sedlab modules.

Exit-code mapping for the CLI lives in cli.py; the classes here carry the
semantics: configuration problems, resource limits, numerical failures and
statistical-precondition refusals are distinct so callers can react.
"""


class SedlabError(Exception):
    """Base class for all sedlab errors."""


class ConfigurationError(SedlabError):
    """Invalid parameters, malformed config files, mismatched grids."""


class ResourceLimitError(SedlabError):
    """A configured hard limit (mode count, memory) would be exceeded."""


class IntegrationDivergedError(SedlabError):
    """Trajectory state became non-finite. Carries the failure time."""

    def __init__(self, message: str, t_fail: float | None = None):
        super().__init__(message)
        self.t_fail = t_fail


class EscapeError(SedlabError):
    """Particle left the force model's confinement region."""

    def __init__(self, message: str, t_fail: float | None = None, x: float | None = None):
        super().__init__(message)
        self.t_fail = t_fail
        self.x = x


class ConvergenceError(SedlabError):
    """An iterative or basis-truncated computation failed to converge."""


class StatisticsError(SedlabError):
    """A statistical estimate was refused (window too short, no error bar)."""


class NumericsError(SedlabError):
    """A quadrature or internal numerical check failed. Carries diagnostics."""
