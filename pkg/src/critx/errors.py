"""Exception types shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 1, SolverError (and
subclasses) -> 2, RefusalError -> 3.
"""


class ConfigError(ValueError):
    """Invalid sweep/analysis configuration."""


class SolverError(RuntimeError):
    """An iterative solver failed to meet its contract."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class DegeneracyError(SolverError):
    """Ground state is (near-)degenerate; fidelity quantities are undefined."""


class RefusalError(RuntimeError):
    """An analysis declined to produce a number (bad window, boundary peak, ...)."""
