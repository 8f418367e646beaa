"""
Linear solves for the implicit strong-damping operator (I - dt/2 * laplacian).

The operator is symmetric positive definite. In 1D it is tridiagonal and is
factorised once with a banded Cholesky decomposition; in 2D it is solved with
conjugate gradients warm-started from the extrapolated state.
"""

from __future__ import annotations

import logging
from typing import Protocol

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.sparse.linalg import cg

from grid.services import Grid
from viscowave.exceptions import DomainError, LinearSolverError
from viscowave.metrics import CG_ITERATIONS

logger = logging.getLogger(__name__)


class DampingSolver(Protocol):
    name: str

    def solve(
        self, rhs: NDArray[np.float64], x0: NDArray[np.float64] | None = None
    ) -> NDArray[np.float64]: ...


def damping_operator(grid: Grid, dt: float) -> sp.csr_matrix:
    return (sp.identity(grid.size, format="csr") - 0.5 * dt * grid.laplacian).tocsr()


class TridiagonalSolver:
    name = "tridiagonal"

    def __init__(self, grid: Grid, dt: float):
        if grid.dim != 1:
            raise DomainError("the tridiagonal solver only handles 1D grids")
        operator = damping_operator(grid, dt)
        banded = np.zeros((2, grid.size))
        banded[0, 1:] = operator.diagonal(1)
        banded[1, :] = operator.diagonal(0)
        self._factor = cholesky_banded(banded, lower=False)

    def solve(self, rhs, x0=None):
        return cho_solve_banded((self._factor, False), rhs, check_finite=False)


class ConjugateGradientSolver:
    name = "cg"

    def __init__(self, grid: Grid, dt: float, tolerance: float, max_iterations: int):
        self.operator = damping_operator(grid, dt)
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.last_iterations = 0

    def solve(self, rhs, x0=None):
        iterations = 0

        def count(_):
            nonlocal iterations
            iterations += 1

        x, info = cg(
            self.operator,
            rhs,
            x0=x0,
            rtol=self.tolerance,
            atol=0.0,
            maxiter=self.max_iterations,
            callback=count,
        )
        self.last_iterations = iterations
        CG_ITERATIONS.observe(iterations)
        if info > 0:
            raise LinearSolverError(
                f"conjugate gradients did not reach rtol={self.tolerance:g}",
                iterations,
            )
        if info < 0:
            raise LinearSolverError("conjugate gradients broke down", iterations)
        return x


def make_solver(
    grid: Grid,
    dt: float,
    kind: str = "auto",
    tolerance: float = 1e-10,
    max_iterations: int = 2000,
) -> DampingSolver:
    if kind == "auto":
        kind = "tridiagonal" if grid.dim == 1 else "cg"
    if kind == "tridiagonal":
        return TridiagonalSolver(grid, dt)
    if kind == "cg":
        return ConjugateGradientSolver(grid, dt, tolerance, max_iterations)
    raise DomainError(f"unknown linear solver {kind!r}")
