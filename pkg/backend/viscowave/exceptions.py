"""Error hierarchy shared by the numerical packages and the CLI."""

from __future__ import annotations

from typing import Any


class SimulationError(Exception):
    """Base class for every failure raised by the simulator."""


class DomainError(SimulationError, ValueError):
    """A scalar argument lies outside the domain of a formula."""


class AdmissibilityError(SimulationError, ValueError):
    """Model hypotheses (material law, exponent range, kernel mass) are violated."""


class GridMismatchError(SimulationError, ValueError):
    pass


class HistoryError(SimulationError):
    """A convolution history does not hold the levels a request needs."""


class MemoryFunctionalError(SimulationError):
    """The history functional came out clearly negative."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class LinearSolverError(SimulationError):
    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class StabilityError(SimulationError):
    """The time step violates the wave CFL bound."""


class ConfigError(SimulationError):
    """Configuration file could not be read or validated."""

    def __init__(self, message: str, errors: list[str] | None = None):
        self.errors = errors or []
        detail = "\n".join(f"  {e}" for e in self.errors)
        super().__init__(f"{message}\n{detail}" if detail else message)
