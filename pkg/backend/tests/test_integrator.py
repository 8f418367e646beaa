import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from grid.services import Grid, dirichlet_eigenvalue, sine_modes
from integrator.config import NumericsConfig, resolve_memory_mode
from integrator.oracles import ManufacturedSolution, modal_solution
from integrator.services import check_cfl, initialize, run, step
from integrator.solvers import (
    ConjugateGradientSolver,
    TridiagonalSolver,
    damping_operator,
    make_solver,
)
from memory.history import MemoryMode
from memory.kernels import KernelPair
from model.services import Coupling, Material
from simulations.specs import CertificationConfig, InitialData, Mode, ProblemSpec
from simulations.studies import manufactured_error, modal_spec
from viscowave.exceptions import (
    AdmissibilityError,
    DomainError,
    LinearSolverError,
    StabilityError,
)

from .factories import NumericsFactory, ProblemSpecFactory, blowup_spec


# Configuration


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dt": 0.0, "t_end": 1.0},
        {"dt": 0.1, "t_end": 0.05},
        {"dt": 0.1, "t_end": 1.0, "cg_tolerance": 1e-3},
        {"dt": 0.1, "t_end": 1.0, "memory_mode": "fft"},
        {"dt": 0.1, "t_end": 1.0, "linear_solver": "lu"},
        {"dt": 0.1, "t_end": 1.0, "cfl_safety": 1.5},
    ],
)
def test_numerics_rejects_invalid_values(kwargs):
    with pytest.raises(DomainError):
        NumericsConfig(**kwargs)


def test_step_count_warns_when_t_end_is_not_a_multiple(caplog):
    assert NumericsConfig(dt=0.1, t_end=1.0).n_steps == 10
    assert NumericsConfig(dt=0.3, t_end=1.0).n_steps == 3
    assert "not a multiple" in caplog.text


def test_auto_memory_mode_depends_on_run_length():
    short = NumericsConfig(dt=0.1, t_end=10.0)
    assert resolve_memory_mode(short, direct_max_steps=100) is MemoryMode.DIRECT
    assert resolve_memory_mode(short, direct_max_steps=50) is MemoryMode.PRONY
    explicit = NumericsConfig(dt=0.1, t_end=10.0, memory_mode="prony")
    assert resolve_memory_mode(explicit) is MemoryMode.PRONY


# Linear solvers


def test_tridiagonal_solver_matches_sparse_solve():
    grid = Grid.interval(1.0, 40)
    rhs = np.random.default_rng(1).normal(size=grid.size)
    expected = spla.spsolve(damping_operator(grid, 0.01).tocsc(), rhs)
    np.testing.assert_allclose(TridiagonalSolver(grid, 0.01).solve(rhs), expected, rtol=1e-12)


def test_conjugate_gradient_solver_matches_sparse_solve():
    grid = Grid.rectangle((1.0, 1.0), (12, 12))
    rhs = np.random.default_rng(2).normal(size=grid.size)
    solver = make_solver(grid, 0.01, "auto", tolerance=1e-12)
    assert solver.name == "cg"
    expected = spla.spsolve(damping_operator(grid, 0.01).tocsc(), rhs)
    np.testing.assert_allclose(solver.solve(rhs), expected, rtol=1e-9, atol=1e-12)
    assert solver.last_iterations > 0


def test_conjugate_gradient_reports_non_convergence():
    grid = Grid.rectangle((1.0, 1.0), (12, 12))
    solver = ConjugateGradientSolver(grid, 1.0, tolerance=1e-12, max_iterations=1)
    with pytest.raises(LinearSolverError) as excinfo:
        solver.solve(np.random.default_rng(3).normal(size=grid.size))
    assert excinfo.value.iterations == 1


def test_tridiagonal_solver_is_one_dimensional():
    with pytest.raises(DomainError):
        TridiagonalSolver(Grid.rectangle((1.0, 1.0), (5, 5)), 0.1)


# Start-up and checks


def test_initialize_rejects_dimension_mismatch():
    mismatched = ProblemSpecFactory(coupling__n=2)
    with pytest.raises(AdmissibilityError):
        initialize(mismatched)


def test_cfl_violation_is_reported(spec):
    coarse_step = ProblemSpecFactory(numerics=NumericsFactory(dt=0.05, t_end=1.0))
    with pytest.raises(StabilityError, match="CFL"):
        initialize(coarse_step)
    with pytest.raises(StabilityError):
        check_cfl(spec, spec.domain, grad_sq_max=1e6)
    assert initialize(coarse_step, check_stability=False).snapshot.step_index == 0


def test_taylor_start_step_is_third_order():
    errors = []
    for dt in (0.02, 0.01):
        spec = modal_spec(n_cells=49, dt=dt, t_end=dt)
        state = initialize(spec)
        mu = dirichlet_eigenvalue(spec.domain, (1,))
        exact, _ = modal_solution(1.0, mu, 1.0, 0.0, dt)
        first = state.u.values / np.sin(spec.domain.axes()[0])
        errors.append(np.max(np.abs(first - exact)))
    assert errors[0] / errors[1] == pytest.approx(8.0, rel=0.15)


def test_step_publishes_previous_level_with_centred_velocity():
    spec = modal_spec(n_cells=49, dt=1e-3, t_end=0.1)
    state = initialize(spec)
    level_one = state.u
    step(state, spec)
    snapshot = state.snapshot
    assert snapshot.step_index == 1
    assert snapshot.t == pytest.approx(1e-3)
    assert snapshot.u is level_one
    mu = dirichlet_eigenvalue(spec.domain, (1,))
    _, velocity = modal_solution(1.0, mu, 1.0, 0.0, 1e-3)
    axis = np.sin(spec.domain.axes()[0])
    np.testing.assert_allclose(snapshot.u_t.values, velocity * axis, atol=1e-5)


# Runs


def test_run_publishes_strided_and_final_levels():
    spec = modal_spec(n_cells=49, dt=0.01, t_end=0.1)
    seen = []
    outcome = run(spec, observers=[lambda s: seen.append(s.step_index)], stride=3)
    assert seen == [0, 3, 6, 9, 10]
    assert outcome.levels == 5
    assert outcome.steps == 10
    assert outcome.last_snapshot.t == pytest.approx(0.1)
    assert not outcome.diverged


def test_run_with_zero_end_time_only_publishes_initial_data():
    spec = modal_spec(n_cells=49, dt=0.01, t_end=0.0)
    outcome = run(spec, keep_snapshots=True)
    assert outcome.steps == 0
    assert [s.step_index for s in outcome.snapshots] == [0]


def test_run_rejects_invalid_stride():
    with pytest.raises(ValueError):
        run(modal_spec(n_cells=49, dt=0.01, t_end=0.1), stride=0)


def test_modal_solution_is_reproduced():
    spec = modal_spec(n_cells=99, dt=2e-3, t_end=1.0)
    final = run(spec).last_snapshot
    mu = dirichlet_eigenvalue(spec.domain, (1,))
    exact, _ = modal_solution(1.0, mu, 1.0, 0.0, final.t)
    profile = np.sin(spec.domain.axes()[0])
    error = np.linalg.norm(final.u.values - exact * profile) / np.linalg.norm(
        exact * profile
    )
    assert error < 1e-4


def test_blowup_is_detected_and_reported():
    outcome = run(blowup_spec(), keep_snapshots=True)
    assert outcome.diverged
    assert outcome.diverged_at is not None and outcome.diverged_at < 2.0
    assert outcome.snapshots[-1].diverged
    assert all(not s.diverged for s in outcome.snapshots[:-1])
    with pytest.raises(StabilityError):
        step(outcome.final_state, blowup_spec())


def test_memory_backends_agree_in_two_dimensions(square_spec):
    finals = {}
    for mode in ("direct", "prony"):
        spec = replace(square_spec, numerics=replace(square_spec.numerics, memory_mode=mode))
        outcome = run(spec)
        assert outcome.memory_mode.value == mode
        finals[mode] = outcome.last_snapshot.u.values
    scale = np.max(np.abs(finals["direct"]))
    assert np.max(np.abs(finals["direct"] - finals["prony"])) < 1e-3 * scale


def test_memory_free_run_has_zero_history_terms():
    spec = ProblemSpecFactory(kernels=KernelPair(), numerics__t_end=0.2)
    outcome = run(spec, keep_snapshots=True)
    assert all(s.memory_u == 0.0 and s.memory_rate_v == 0.0 for s in outcome.snapshots)


# Oracles


def test_manufactured_solution_requires_boundary_compatibility():
    spec = ProblemSpecFactory()
    with pytest.raises(DomainError):
        ManufacturedSolution(spec.material, spec.kernels, spec.coupling, u_expr="exp(-t)*cos(x)")


def test_manufactured_forcing_reproduces_the_exact_solution():
    assert manufactured_error(49) < 1e-2


def test_modal_solution_is_a_damped_oscillation():
    y0, v0 = modal_solution(1.0, 1.0, 1.0, 0.0, 0.0)
    assert (y0, v0) == (1.0, 0.0)
    y, _ = modal_solution(1.0, 1.0, 1.0, 0.0, 20.0)
    assert abs(y) < math.exp(-9)


def test_sine_mode_initial_data_are_sampled_on_the_grid():
    spec = modal_spec(n_cells=49, dt=0.01, t_end=0.01)
    state = initialize(spec)
    expected = sine_modes(spec.domain, [((1,), 1.0)])
    np.testing.assert_array_equal(state.snapshot.u.values, expected.values)
