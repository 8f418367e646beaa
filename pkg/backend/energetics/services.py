"""
Energy functionals of the coupled system evaluated on level snapshots.

    I = sum_i (m0 - int_0^t g_i) |grad w_i|^2 + (g_i o grad w_i) - 2(p+2) int F
    J = 1/2 sum_i [(m0 - int_0^t g_i) |grad w_i|^2 + m1/(gamma+1) |grad w_i|^{2(gamma+1)}
                   + (g_i o grad w_i)] - int F
    E = 1/2 (|u_t|^2 + |v_t|^2) + J

The time integrals of the kernels use the Prony closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

import numpy as np

from grid.services import grad_norm_sq, integrate, l2_inner
from integrator.services import LevelSnapshot
from memory.kernels import StiffnessConstants, check_admissible
from memory.kernels import kernel_eval, kernel_integral
from model.services import coupling_F
from viscowave.metrics import ENERGY

if TYPE_CHECKING:
    from simulations.specs import ProblemSpec

logger = logging.getLogger(__name__)

MONOTONE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    step_index: int
    kinetic: float
    stiffness: float
    kirchhoff: float
    memory: float
    potential: float
    I_value: float
    J_value: float
    E_value: float
    dissipation_rate: float
    alpha: float
    grad_u_sq: float
    grad_v_sq: float
    velocity_sq: float
    regularity: float
    dissipation_residual: float = 0.0
    diverged: bool = False


def relaxed_stiffness(spec: ProblemSpec, t: float) -> tuple[float, float]:
    """m0 - int_0^t g_i(s) ds for both equations."""
    m0 = spec.material.m0
    return (
        m0 - kernel_integral(spec.kernels.g1, t),
        m0 - kernel_integral(spec.kernels.g2, t),
    )


def potential_integral(snapshot: LevelSnapshot, spec: ProblemSpec) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        density = coupling_F(snapshot.u.values, snapshot.v.values, spec.coupling)
    return integrate(snapshot.u.grid, density)


def _gradient_part(snapshot: LevelSnapshot, spec: ProblemSpec) -> float:
    s1, s2 = relaxed_stiffness(spec, snapshot.t)
    return s1 * snapshot.grad_u_sq + s2 * snapshot.grad_v_sq


def _kirchhoff_part(snapshot: LevelSnapshot, spec: ProblemSpec) -> float:
    mat = spec.material
    if mat.m1 == 0:
        return 0.0
    exponent = mat.gamma + 1
    return (
        0.5
        * mat.m1
        / exponent
        * (snapshot.grad_u_sq**exponent + snapshot.grad_v_sq**exponent)
    )


def _memory_sum(snapshot: LevelSnapshot) -> float:
    return snapshot.memory_u + snapshot.memory_v


def compute_I(snapshot: LevelSnapshot, spec: ProblemSpec) -> float:
    return (
        _gradient_part(snapshot, spec)
        + _memory_sum(snapshot)
        - 2 * (spec.coupling.p + 2) * potential_integral(snapshot, spec)
    )


def compute_J(snapshot: LevelSnapshot, spec: ProblemSpec) -> float:
    return (
        0.5 * _gradient_part(snapshot, spec)
        + _kirchhoff_part(snapshot, spec)
        + 0.5 * _memory_sum(snapshot)
        - potential_integral(snapshot, spec)
    )


def dissipation_rate(snapshot: LevelSnapshot, spec: ProblemSpec) -> float:
    """-E'(t) as given by the energy identity.

    |grad u_t|^2 + |grad v_t|^2 + 1/2 sum_i g_i(t) |grad w_i|^2
    - 1/2 sum_i (g_i' o grad w_i)
    """
    grid = snapshot.u.grid
    g1 = kernel_eval(spec.kernels.g1, snapshot.t)
    g2 = kernel_eval(spec.kernels.g2, snapshot.t)
    return (
        grad_norm_sq(grid, snapshot.u_t)
        + grad_norm_sq(grid, snapshot.v_t)
        + 0.5 * (g1 * snapshot.grad_u_sq + g2 * snapshot.grad_v_sq)
        - 0.5 * (snapshot.memory_rate_u + snapshot.memory_rate_v)
    )


def well_norm(
    snapshot: LevelSnapshot, constants: StiffnessConstants
) -> float:
    """alpha(t) = (k1 |grad u|^2 + k2 |grad v|^2 + g1 o grad u + g2 o grad v)^(1/2)."""
    value = (
        constants.k1 * snapshot.grad_u_sq
        + constants.k2 * snapshot.grad_v_sq
        + _memory_sum(snapshot)
    )
    return math.sqrt(value) if value >= 0 else math.nan


def compute_E(
    snapshot: LevelSnapshot,
    spec: ProblemSpec,
    constants: StiffnessConstants | None = None,
) -> EnergyRecord:
    """Full energy breakdown at one level; the residual is filled in by the recorder."""
    if constants is None:
        constants = check_admissible(spec.kernels.g1, spec.kernels.g2, spec.material)
    grid = snapshot.u.grid
    with np.errstate(over="ignore", invalid="ignore"):
        velocity_sq = l2_inner(grid, snapshot.u_t, snapshot.u_t) + l2_inner(
            grid, snapshot.v_t, snapshot.v_t
        )
        gradient = _gradient_part(snapshot, spec)
        memory = _memory_sum(snapshot)
        potential = potential_integral(snapshot, spec)
        kinetic = 0.5 * velocity_sq
        J = 0.5 * gradient + _kirchhoff_part(snapshot, spec) + 0.5 * memory - potential
        return EnergyRecord(
            t=snapshot.t,
            step_index=snapshot.step_index,
            kinetic=kinetic,
            stiffness=0.5 * gradient,
            kirchhoff=_kirchhoff_part(snapshot, spec),
            memory=0.5 * memory,
            potential=potential,
            I_value=gradient + memory - 2 * (spec.coupling.p + 2) * potential,
            J_value=J,
            E_value=kinetic + J,
            dissipation_rate=dissipation_rate(snapshot, spec),
            alpha=well_norm(snapshot, constants),
            grad_u_sq=snapshot.grad_u_sq,
            grad_v_sq=snapshot.grad_v_sq,
            velocity_sq=velocity_sq,
            regularity=snapshot.regularity,
            diverged=snapshot.diverged,
        )


def dissipation_residual(record_prev: EnergyRecord, record_next: EnergyRecord) -> float:
    """Discrete energy identity: dE/dt + D, with D averaged over the interval."""
    span = record_next.t - record_prev.t
    if span <= 0:
        return 0.0
    return (record_next.E_value - record_prev.E_value) / span + 0.5 * (
        record_prev.dissipation_rate + record_next.dissipation_rate
    )


def monotone_violations(
    records: Sequence[EnergyRecord], tolerance: float = MONOTONE_TOLERANCE
) -> list[int]:
    """Indices n with E(t_{n+1}) > E(t_n) + tolerance * E(0)."""
    if not records:
        return []
    slack = tolerance * abs(records[0].E_value)
    return [
        n
        for n in range(len(records) - 1)
        if records[n + 1].E_value > records[n].E_value + slack
    ]


class EnergyRecorder:
    """Run observer that turns published snapshots into an energy series.

    ``listeners`` receive every finished record, e.g. the well monitor.
    """

    def __init__(
        self,
        spec: ProblemSpec,
        listeners: Iterable[Callable[[EnergyRecord], None]] = (),
    ):
        self.spec = spec
        self.constants = check_admissible(
            spec.kernels.g1, spec.kernels.g2, spec.material
        )
        self.listeners = list(listeners)
        self.records: list[EnergyRecord] = []

    def __call__(self, snapshot: LevelSnapshot) -> None:
        record = compute_E(snapshot, self.spec, self.constants)
        if self.records:
            record = replace(
                record,
                dissipation_residual=dissipation_residual(self.records[-1], record),
            )
        self.records.append(record)
        if math.isfinite(record.E_value):
            ENERGY.set(record.E_value)
        for listener in self.listeners:
            listener(record)

    def violations(self, tolerance: float = MONOTONE_TOLERANCE) -> list[int]:
        violations = monotone_violations(self.records, tolerance)
        if violations:
            logger.warning(
                "Energy increased beyond tolerance at %d recorded levels",
                len(violations),
            )
        return violations
