"""Numerical parameters of a run and the resolution of ``auto`` choices."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from memory.history import MemoryMode
from viscowave.exceptions import DomainError

logger = logging.getLogger(__name__)

MEMORY_MODES = ("auto", "direct", "prony")
LINEAR_SOLVERS = ("auto", "tridiagonal", "cg")

DEFAULT_CG_TOLERANCE = 1e-10
DEFAULT_CG_MAX_ITERATIONS = 2000
DEFAULT_DIVERGENCE_THRESHOLD = 1e12
DEFAULT_CFL_SAFETY = 0.5
DIRECT_MAX_STEPS = 10_000
MAX_CG_TOLERANCE = 1e-4


@dataclass(frozen=True)
class NumericsConfig:
    dt: float
    t_end: float
    memory_mode: str = "auto"
    linear_solver: str = "auto"
    cg_tolerance: float = DEFAULT_CG_TOLERANCE
    cg_max_iterations: int = DEFAULT_CG_MAX_ITERATIONS
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD
    cfl_safety: float = DEFAULT_CFL_SAFETY

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0 or (0 < self.t_end < self.dt * (1 - 1e-9)):
            raise DomainError(
                f"t_end must be 0 or at least dt={self.dt}, got {self.t_end}"
            )
        if self.memory_mode not in MEMORY_MODES:
            raise DomainError(
                f"memory_mode must be one of {MEMORY_MODES}, got {self.memory_mode!r}"
            )
        if self.linear_solver not in LINEAR_SOLVERS:
            raise DomainError(
                f"linear_solver must be one of {LINEAR_SOLVERS}, "
                f"got {self.linear_solver!r}"
            )
        if not 0 < self.cg_tolerance <= MAX_CG_TOLERANCE:
            raise DomainError(
                f"cg_tolerance must lie in (0, {MAX_CG_TOLERANCE}], "
                f"got {self.cg_tolerance}"
            )
        if self.cg_max_iterations < 1:
            raise DomainError("cg_max_iterations must be at least 1")
        if not self.divergence_threshold > 0:
            raise DomainError("divergence_threshold must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise DomainError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")

    @property
    def n_steps(self) -> int:
        steps = round(self.t_end / self.dt)
        if not math.isclose(steps * self.dt, self.t_end, rel_tol=1e-9, abs_tol=1e-12):
            logger.warning(
                "t_end=%g is not a multiple of dt=%g; running %d steps to t=%g",
                self.t_end,
                self.dt,
                steps,
                steps * self.dt,
            )
        return steps


def resolve_memory_mode(
    numerics: NumericsConfig, direct_max_steps: int = DIRECT_MAX_STEPS
) -> MemoryMode:
    if numerics.memory_mode != "auto":
        return MemoryMode(numerics.memory_mode)
    mode = (
        MemoryMode.DIRECT if numerics.n_steps <= direct_max_steps else MemoryMode.PRONY
    )
    logger.info(
        "Resolved memory_mode=auto to %s for %d steps", mode.value, numerics.n_steps
    )
    return mode
