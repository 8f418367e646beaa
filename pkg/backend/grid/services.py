"""
Uniform tensor grids with homogeneous Dirichlet boundaries.

Grid functions store interior values only; boundary values are identically
zero. ``grad_norm_sq`` is the discrete Dirichlet form and matches
``<-laplacian f, f>`` exactly (summation by parts with zero ghosts).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import splu

from viscowave.exceptions import DomainError, GridMismatchError

logger = logging.getLogger(__name__)

MIN_CELLS = 3
POWER_ITERATION_TOL = 1e-12
POWER_ITERATION_MAX = 10_000


@dataclass(frozen=True)
class Grid:
    dim: int
    lengths: tuple[float, ...]
    n_cells: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"grid dimension must be 1 or 2, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.n_cells) != self.dim:
            raise DomainError(
                f"expected {self.dim} lengths and cell counts, "
                f"got {self.lengths} and {self.n_cells}"
            )
        if any(length <= 0 for length in self.lengths):
            raise DomainError(f"domain lengths must be positive, got {self.lengths}")
        if any(n < MIN_CELLS for n in self.n_cells):
            raise DomainError(
                f"at least {MIN_CELLS} interior points per axis required, "
                f"got {self.n_cells}"
            )

    @classmethod
    def interval(cls, length: float, n_cells: int) -> Grid:
        return cls(dim=1, lengths=(float(length),), n_cells=(int(n_cells),))

    @classmethod
    def rectangle(cls, lengths: Iterable[float], n_cells: Iterable[int]) -> Grid:
        return cls(
            dim=2,
            lengths=tuple(float(x) for x in lengths),
            n_cells=tuple(int(n) for n in n_cells),
        )

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / (n + 1) for L, n in zip(self.lengths, self.n_cells))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n_cells

    @property
    def size(self) -> int:
        return math.prod(self.n_cells)

    @property
    def cell_measure(self) -> float:
        return math.prod(self.h)

    def axes(self) -> list[NDArray[np.float64]]:
        """Interior node coordinates per axis."""
        return [h * np.arange(1, n + 1) for h, n in zip(self.h, self.n_cells)]

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Five-point (three-point in 1D) Dirichlet Laplacian on flattened values."""
        factors = []
        for h, n in zip(self.h, self.n_cells):
            factors.append(
                sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n), format="csr")
                / h**2
            )
        if self.dim == 1:
            return factors[0].tocsr()
        nx, ny = self.n_cells
        return (
            sp.kron(factors[0], sp.eye(ny)) + sp.kron(sp.eye(nx), factors[1])
        ).tocsr()

    def zeros(self) -> Field:
        return Field(np.zeros(self.shape), self)

    def field(self, values) -> Field:
        return Field(np.asarray(values, dtype=float).reshape(self.shape), self)


@dataclass(frozen=True, eq=False)
class Field:
    values: NDArray[np.float64]
    grid: Grid

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"field of shape {self.values.shape} does not match grid "
                f"{self.grid.shape}"
            )

    @property
    def flat(self) -> NDArray[np.float64]:
        return self.values.reshape(-1)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other: Field) -> Field:
        _require_same_grid(self.grid, other)
        return Field(self.values + other.values, self.grid)

    def __sub__(self, other: Field) -> Field:
        _require_same_grid(self.grid, other)
        return Field(self.values - other.values, self.grid)

    def __mul__(self, scalar: float) -> Field:
        return Field(self.values * scalar, self.grid)

    __rmul__ = __mul__


def _require_same_grid(grid: Grid, *fields: Field) -> None:
    for f in fields:
        if f.grid != grid:
            raise GridMismatchError(f"field lives on {f.grid}, expected {grid}")


def laplacian_apply(grid: Grid, f: Field) -> Field:
    _require_same_grid(grid, f)
    return Field((grid.laplacian @ f.flat).reshape(grid.shape), grid)


def grad_norm_sq(grid: Grid, f: Field) -> float:
    _require_same_grid(grid, f)
    padded = np.pad(f.values, 1)
    total = 0.0
    for axis, h in enumerate(grid.h):
        total += float(np.sum(np.diff(padded, axis=axis) ** 2)) / h**2
    return total * grid.cell_measure


def l2_inner(grid: Grid, f: Field, g: Field) -> float:
    _require_same_grid(grid, f, g)
    return float(np.vdot(f.values, g.values)) * grid.cell_measure


def lp_norm(grid: Grid, f: Field, q: float) -> float:
    _require_same_grid(grid, f)
    if q < 1:
        raise DomainError(f"L^q norms need q >= 1, got q={q}")
    if math.isinf(q):
        return float(np.max(np.abs(f.values)))
    return float(np.sum(np.abs(f.values) ** q) * grid.cell_measure) ** (1.0 / q)


def integrate(grid: Grid, values: NDArray[np.float64]) -> float:
    """Midpoint quadrature of a pointwise quantity over the interior nodes."""
    return float(np.sum(values)) * grid.cell_measure


def dirichlet_eigenvalue(grid: Grid, modes: tuple[int, ...]) -> float:
    """Closed-form eigenvalue of -laplacian for the separable sine mode."""
    return sum(
        4.0 / h**2 * math.sin(k * math.pi * h / (2 * L)) ** 2
        for k, h, L in zip(modes, grid.h, grid.lengths)
    )


def smallest_eigenvalue(grid: Grid) -> float:
    """Smallest eigenvalue of -laplacian by inverse power iteration."""
    solve = splu((-grid.laplacian).tocsc()).solve
    x = np.ones(grid.size)
    x /= np.linalg.norm(x)
    lam = math.inf
    for iteration in range(1, POWER_ITERATION_MAX + 1):
        y = solve(x)
        # Rayleigh quotient of the inverse; avoids the cancellation in x.(-L x).
        lam_new = 1.0 / float(x @ y)
        x = y / np.linalg.norm(y)
        if abs(lam_new - lam) <= POWER_ITERATION_TOL * lam_new:
            logger.debug("Inverse iteration converged in %d steps", iteration)
            return lam_new
        lam = lam_new
    logger.warning(
        "Inverse iteration hit %d iterations without reaching tolerance",
        POWER_ITERATION_MAX,
    )
    return lam


def poincare_constant(grid: Grid) -> float:
    return 1.0 / math.sqrt(smallest_eigenvalue(grid))


def sine_modes(grid: Grid, modes: Iterable[tuple[tuple[int, ...], float]]) -> Field:
    """Sum of amplitude * prod_a sin(k_a pi x_a / L_a) sampled on the interior."""
    values = np.zeros(grid.shape)
    axes = grid.axes()
    for index, amplitude in modes:
        if len(index) != grid.dim:
            raise DomainError(f"mode index {index} does not match dimension {grid.dim}")
        if any(k < 1 for k in index):
            raise DomainError(f"mode indices start at 1, got {index}")
        factors = [np.sin(k * np.pi * x / L) for k, x, L in zip(index, axes, grid.lengths)]
        term = factors[0] if grid.dim == 1 else np.multiply.outer(factors[0], factors[1])
        values += amplitude * term
    return Field(values, grid)
