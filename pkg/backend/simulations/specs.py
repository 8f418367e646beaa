"""Plain data types describing one simulation problem and its outcome."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from grid.services import Grid
from integrator.config import NumericsConfig
from memory.kernels import KernelPair
from model.services import Coupling, Material
from viscowave.exceptions import DomainError


class Mode(NamedTuple):
    index: tuple[int, ...]
    amplitude: float


@dataclass(frozen=True)
class InitialData:
    """Sine-mode expansions of u(., 0), u_t(., 0), v(., 0) and v_t(., 0)."""

    u0_modes: tuple[Mode, ...] = ()
    u1_modes: tuple[Mode, ...] = ()
    v0_modes: tuple[Mode, ...] = ()
    v1_modes: tuple[Mode, ...] = ()

    def scaled(self, factor: float) -> InitialData:
        def scale(modes):
            return tuple(Mode(m.index, factor * m.amplitude) for m in modes)

        return InitialData(
            scale(self.u0_modes),
            scale(self.u1_modes),
            scale(self.v0_modes),
            scale(self.v1_modes),
        )


@dataclass(frozen=True)
class OutputConfig:
    series_path: str = "series.csv"
    report_path: str = "report.json"
    stride: int = 1
    metrics_path: str | None = None

    def __post_init__(self):
        if self.stride < 1:
            raise DomainError(f"stride must be at least 1, got {self.stride}")


@dataclass(frozen=True)
class CertificationConfig:
    enabled: bool = True
    eta_budget: int = 64
    eta_refinement_steps: int = 200
    eta_modes: int = 8
    eta_audit_samples: int = 0


@dataclass(frozen=True)
class ProblemSpec:
    domain: Grid
    material: Material
    numerics: NumericsConfig
    kernels: KernelPair = KernelPair()
    coupling: Coupling = Coupling()
    initial: InitialData = InitialData()
    outputs: OutputConfig = OutputConfig()
    certification: CertificationConfig = CertificationConfig()
    seed: int = 0

    def __post_init__(self):
        if self.seed < 0:
            raise DomainError(f"seed must be nonnegative, got {self.seed}")


@dataclass
class SimResult:
    series: list = field(default_factory=list)
    report: object | None = None
    diverged: bool = False
    diverged_at: float | None = None
    steps: int = 0
    memory_mode: str = ""
    wall_time: float = 0.0
    energy_violations: list[int] = field(default_factory=list)
    clamped_memory: int = 0
