"""
Time integration of the coupled viscoelastic Kirchhoff system.

Inertia uses central differences, the strong damping term is implicit through
the centred velocity (u^{n+1} - u^{n-1}) / (2 dt), and the Kirchhoff, memory
and coupling terms are explicit at t_n:

    (I - dt/2 L) u^{n+1} = 2 u^n - u^{n-1} - dt/2 L u^{n-1}
                           + dt^2 (M(|grad u^n|^2) L u^n - Q^n + f1(u^n, v^n) + S1(t_n))

where Q^n is the memory convolution of the Laplacian history and S1 an
optional manufactured source. The v equation is identical with g2 and f2.

Each step also produces the ``LevelSnapshot`` of the previous level, whose
velocity is centred because both neighbours are then known.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Iterable

import numpy as np
from numpy.typing import NDArray

from grid.services import Field, Grid, grad_norm_sq, l2_inner, sine_modes
from integrator.config import DIRECT_MAX_STEPS, resolve_memory_mode
from integrator.solvers import DampingSolver, make_solver
from memory.history import MemoryMode, MemoryTrack, g_circ
from memory.kernels import StiffnessConstants, check_admissible
from model.services import coupling_f1, coupling_f2, kirchhoff_M
from viscowave.exceptions import AdmissibilityError, StabilityError
from viscowave.metrics import STEP_SECONDS, STEPS

if TYPE_CHECKING:
    from simulations.specs import ProblemSpec

logger = logging.getLogger(__name__)

Forcing = Callable[[float], tuple[NDArray[np.float64], NDArray[np.float64]]]
Observer = Callable[["LevelSnapshot"], None]


@dataclass(frozen=True)
class LevelSnapshot:
    """Everything the energy functionals need at one time level."""

    t: float
    step_index: int
    u: Field
    v: Field
    u_t: Field
    v_t: Field
    grad_u_sq: float
    grad_v_sq: float
    memory_u: float = 0.0
    memory_v: float = 0.0
    memory_rate_u: float = 0.0
    memory_rate_v: float = 0.0
    lap_u_sq: float = 0.0
    lap_v_sq: float = 0.0
    diverged: bool = False

    @property
    def regularity(self) -> float:
        """|u_t|^2 + |v_t|^2 + |lap u|^2 + |lap v|^2."""
        grid = self.u.grid
        return (
            l2_inner(grid, self.u_t, self.u_t)
            + l2_inner(grid, self.v_t, self.v_t)
            + self.lap_u_sq
            + self.lap_v_sq
        )


@dataclass
class StepWorkspace:
    grid: Grid
    solver: DampingSolver
    memory_mode: MemoryMode
    constants: StiffnessConstants
    forcing: Forcing | None = None

    def sources(self, t: float) -> tuple[NDArray | float, NDArray | float]:
        if self.forcing is None:
            return 0.0, 0.0
        s1, s2 = self.forcing(t)
        return np.asarray(s1).reshape(-1), np.asarray(s2).reshape(-1)


@dataclass
class SimState:
    t: float
    step_index: int
    u: Field
    v: Field
    u_prev: Field
    v_prev: Field
    u_hist: MemoryTrack
    v_hist: MemoryTrack
    workspace: StepWorkspace
    snapshot: LevelSnapshot
    diverged: bool = False
    grad_sq_max: float = 0.0


@dataclass
class SimRunResult:
    final_state: SimState
    levels: int
    steps: int
    diverged: bool
    memory_mode: MemoryMode
    wall_time: float
    diverged_at: float | None = None
    clamped_memory: int = 0
    snapshots: list[LevelSnapshot] = field(default_factory=list)

    @property
    def last_snapshot(self) -> LevelSnapshot:
        return self.final_state.snapshot


def _cfl_limit(grid: Grid, stiffness: float, safety: float) -> float:
    return safety / math.sqrt(stiffness * sum(1.0 / h**2 for h in grid.h))


def check_cfl(spec: ProblemSpec, grid: Grid, grad_sq_max: float) -> None:
    stiffness = kirchhoff_M(grad_sq_max, spec.material)
    limit = _cfl_limit(grid, stiffness, spec.numerics.cfl_safety)
    if spec.numerics.dt > limit:
        logger.error(
            "CFL violated: dt=%g exceeds %g (M=%g at |grad|^2=%g)",
            spec.numerics.dt,
            limit,
            stiffness,
            grad_sq_max,
        )
        raise StabilityError(
            f"dt={spec.numerics.dt:g} exceeds the wave CFL limit {limit:g} "
            f"(safety {spec.numerics.cfl_safety}, M={stiffness:g}); reduce dt"
        )


def sample_initial(spec: ProblemSpec, grid: Grid) -> tuple[Field, Field, Field, Field]:
    def sample(modes) -> Field:
        return sine_modes(grid, [(m.index, m.amplitude) for m in modes])

    data = spec.initial
    return (
        sample(data.u0_modes),
        sample(data.u1_modes),
        sample(data.v0_modes),
        sample(data.v1_modes),
    )


def _velocity(after: Field, before: Field, span: float) -> Field:
    return Field((after.values - before.values) / span, after.grid)


def initialize(
    spec: ProblemSpec,
    forcing: Forcing | None = None,
    direct_max_steps: int = DIRECT_MAX_STEPS,
    check_stability: bool = True,
) -> SimState:
    """Sample the initial data and take the Taylor start step to level 1.

    ``check_stability=False`` skips the CFL guard, for callers that never step.
    """
    grid = spec.domain
    if spec.coupling.n != grid.dim:
        raise AdmissibilityError(
            f"coupling dimension n={spec.coupling.n} does not match the "
            f"{grid.dim}D domain"
        )
    constants = check_admissible(spec.kernels.g1, spec.kernels.g2, spec.material)
    numerics = spec.numerics
    dt = numerics.dt
    mode = resolve_memory_mode(numerics, direct_max_steps)
    solver = make_solver(
        grid,
        dt,
        numerics.linear_solver,
        numerics.cg_tolerance,
        numerics.cg_max_iterations,
    )
    workspace = StepWorkspace(grid, solver, mode, constants, forcing)

    u0, u1, v0, v1 = sample_initial(spec, grid)
    grad_u, grad_v = grad_norm_sq(grid, u0), grad_norm_sq(grid, v0)
    grad_sq_max = max(grad_u, grad_v)
    if check_stability:
        check_cfl(spec, grid, grad_sq_max)

    u_hist = MemoryTrack(grid, spec.kernels.g1, dt, mode)
    v_hist = MemoryTrack(grid, spec.kernels.g2, dt, mode)
    L = grid.laplacian
    lap_u = grid.field(L @ u0.flat)
    lap_v = grid.field(L @ v0.flat)
    u_hist.record(lap_u, grad_u)
    v_hist.record(lap_v, grad_v)

    s1, s2 = workspace.sources(0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        acc_u = (
            kirchhoff_M(grad_u, spec.material) * lap_u.flat
            + L @ u1.flat
            + np.reshape(coupling_f1(u0.values, v0.values, spec.coupling), -1)
            + s1
        )
        acc_v = (
            kirchhoff_M(grad_v, spec.material) * lap_v.flat
            + L @ v1.flat
            + np.reshape(coupling_f2(u0.values, v0.values, spec.coupling), -1)
            + s2
        )
        u_first = grid.field(u0.flat + dt * u1.flat + 0.5 * dt**2 * acc_u)
        v_first = grid.field(v0.flat + dt * v1.flat + 0.5 * dt**2 * acc_v)

    snapshot = LevelSnapshot(
        t=0.0,
        step_index=0,
        u=u0,
        v=v0,
        u_t=u1,
        v_t=v1,
        grad_u_sq=grad_u,
        grad_v_sq=grad_v,
        lap_u_sq=l2_inner(grid, lap_u, lap_u),
        lap_v_sq=l2_inner(grid, lap_v, lap_v),
    )
    state = SimState(
        t=dt,
        step_index=1,
        u=u_first,
        v=v_first,
        u_prev=u0,
        v_prev=v0,
        u_hist=u_hist,
        v_hist=v_hist,
        workspace=workspace,
        snapshot=snapshot,
        grad_sq_max=grad_sq_max,
    )
    if not (u_first.is_finite() and v_first.is_finite()):
        logger.warning("Taylor start step produced non-finite values")
        state.diverged = True
        state.snapshot = _replace_diverged(snapshot)
    logger.debug(
        "Initialised %dD run: %d steps, memory=%s, solver=%s",
        grid.dim,
        numerics.n_steps,
        mode.value,
        solver.name,
    )
    return state


def _replace_diverged(snapshot: LevelSnapshot) -> LevelSnapshot:
    return replace(snapshot, diverged=True)


def _advance_field(
    state: SimState,
    dt: float,
    w: Field,
    w_prev: Field,
    lap: Field,
    conv: Field,
    stiffness: float,
    source,
) -> NDArray[np.float64] | None:
    """Solve for w^{n+1}; returns None when the step diverges."""
    L = state.workspace.grid.laplacian
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = (
            2.0 * w.flat
            - w_prev.flat
            - 0.5 * dt * (L @ w_prev.flat)
            + dt**2 * (stiffness * lap.flat - conv.flat + source)
        )
    if not np.all(np.isfinite(rhs)):
        return None
    guess = 2.0 * w.flat - w_prev.flat
    return state.workspace.solver.solve(rhs, guess)


def step(state: SimState, spec: ProblemSpec) -> SimState:
    """Advance from level n to n+1 and publish the snapshot of level n."""
    if state.diverged:
        raise StabilityError("cannot step a diverged state")
    started = time.perf_counter()
    grid = state.workspace.grid
    dt = spec.numerics.dt
    n = state.step_index
    L = grid.laplacian

    with np.errstate(over="ignore", invalid="ignore"):
        lap_u = grid.field(L @ state.u.flat)
        lap_v = grid.field(L @ state.v.flat)
        grad_u = grad_norm_sq(grid, state.u)
        grad_v = grad_norm_sq(grid, state.v)

    finite = all(math.isfinite(x) for x in (grad_u, grad_v))
    u_next = v_next = None
    memory = (0.0, 0.0, 0.0, 0.0)
    if finite:
        conv_u = state.u_hist.record(lap_u, grad_u)
        conv_v = state.v_hist.record(lap_v, grad_v)
        memory = (
            g_circ(state.u_hist, state.u, grad_u),
            g_circ(state.v_hist, state.v, grad_v),
            g_circ(state.u_hist, state.u, grad_u, derivative=True),
            g_circ(state.v_hist, state.v, grad_v, derivative=True),
        )
        state.grad_sq_max = max(state.grad_sq_max, grad_u, grad_v)
        check_cfl(spec, grid, state.grad_sq_max)

        s1, s2 = state.workspace.sources(state.t)
        with np.errstate(over="ignore", invalid="ignore"):
            f1 = np.reshape(coupling_f1(state.u.values, state.v.values, spec.coupling), -1)
            f2 = np.reshape(coupling_f2(state.u.values, state.v.values, spec.coupling), -1)
        u_next = _advance_field(
            state,
            dt,
            state.u,
            state.u_prev,
            lap_u,
            conv_u,
            kirchhoff_M(grad_u, spec.material),
            f1 + s1,
        )
        v_next = _advance_field(
            state,
            dt,
            state.v,
            state.v_prev,
            lap_v,
            conv_v,
            kirchhoff_M(grad_v, spec.material),
            f2 + s2,
        )

    threshold = spec.numerics.divergence_threshold
    diverged = (
        u_next is None
        or v_next is None
        or not (np.all(np.isfinite(u_next)) and np.all(np.isfinite(v_next)))
        or max(np.max(np.abs(u_next)), np.max(np.abs(v_next))) > threshold
    )

    if diverged:
        u_t = _velocity(state.u, state.u_prev, dt)
        v_t = _velocity(state.v, state.v_prev, dt)
    else:
        u_next_field = grid.field(u_next)
        v_next_field = grid.field(v_next)
        u_t = _velocity(u_next_field, state.u_prev, 2 * dt)
        v_t = _velocity(v_next_field, state.v_prev, 2 * dt)

    with np.errstate(over="ignore", invalid="ignore"):
        lap_u_sq = l2_inner(grid, lap_u, lap_u)
        lap_v_sq = l2_inner(grid, lap_v, lap_v)
    state.snapshot = LevelSnapshot(
        t=state.t,
        step_index=n,
        u=state.u,
        v=state.v,
        u_t=u_t,
        v_t=v_t,
        grad_u_sq=grad_u,
        grad_v_sq=grad_v,
        memory_u=memory[0],
        memory_v=memory[1],
        memory_rate_u=memory[2],
        memory_rate_v=memory[3],
        lap_u_sq=lap_u_sq,
        lap_v_sq=lap_v_sq,
        diverged=diverged,
    )

    if diverged:
        state.diverged = True
        logger.warning(
            "Divergence detected advancing from t=%g (step %d): non-finite values "
            "or max norm above %g",
            state.t,
            n,
            threshold,
        )
    else:
        state.u_prev, state.v_prev = state.u, state.v
        state.u, state.v = u_next_field, v_next_field
        state.t = (n + 1) * dt
        state.step_index = n + 1

    STEPS.inc()
    STEP_SECONDS.observe(time.perf_counter() - started)
    return state


def run(
    spec: ProblemSpec,
    observers: Iterable[Observer] = (),
    forcing: Forcing | None = None,
    stride: int = 1,
    direct_max_steps: int = DIRECT_MAX_STEPS,
    keep_snapshots: bool = False,
) -> SimRunResult:
    """Step until the snapshot of the final level is published or the run diverges.

    Observers see level 0, every ``stride``-th level, the final level and the
    level at which divergence was detected.
    """
    if stride < 1:
        raise ValueError(f"stride must be at least 1, got {stride}")
    observers = list(observers)
    started = time.perf_counter()
    final_level = spec.numerics.n_steps
    state = initialize(spec, forcing, direct_max_steps)
    logger.info(
        "Run started: %d levels, dt=%g, memory=%s",
        final_level + 1,
        spec.numerics.dt,
        state.workspace.memory_mode.value,
    )

    snapshots: list[LevelSnapshot] = []
    levels = 0
    steps = 0

    def publish(snapshot: LevelSnapshot) -> None:
        nonlocal levels
        levels += 1
        if keep_snapshots:
            snapshots.append(snapshot)
        for observer in observers:
            observer(snapshot)

    publish(state.snapshot)
    while not state.diverged and state.snapshot.step_index < final_level:
        step(state, spec)
        steps += 1
        snapshot = state.snapshot
        if (
            snapshot.step_index % stride == 0
            or snapshot.step_index == final_level
            or snapshot.diverged
        ):
            publish(snapshot)

    wall_time = time.perf_counter() - started
    diverged_at = state.snapshot.t if state.diverged else None
    clamped = state.u_hist.clamped + state.v_hist.clamped
    if state.diverged:
        logger.warning("Run diverged at t=%g after %d steps", diverged_at, steps)
    else:
        logger.info("Run finished: %d steps in %.2fs", steps, wall_time)
    if clamped:
        logger.info("Memory functional clamped to zero %d times", clamped)
    return SimRunResult(
        final_state=state,
        levels=levels,
        steps=steps,
        diverged=state.diverged,
        memory_mode=state.workspace.memory_mode,
        wall_time=wall_time,
        diverged_at=diverged_at,
        clamped_memory=clamped,
        snapshots=snapshots,
    )
