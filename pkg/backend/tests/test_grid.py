import math

import numpy as np
import pytest

from grid.services import (
    Grid,
    dirichlet_eigenvalue,
    grad_norm_sq,
    integrate,
    l2_inner,
    laplacian_apply,
    lp_norm,
    poincare_constant,
    sine_modes,
    smallest_eigenvalue,
)
from viscowave.exceptions import DomainError, GridMismatchError

from .factories import GridFactory, SquareGridFactory


def test_interval_geometry():
    grid = Grid.interval(1.0, 4)
    assert grid.h == (0.2,)
    assert grid.shape == (4,)
    np.testing.assert_allclose(grid.axes()[0], [0.2, 0.4, 0.6, 0.8])


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dim": 3, "lengths": (1, 1, 1), "n_cells": (4, 4, 4)},
        {"dim": 1, "lengths": (0.0,), "n_cells": (10,)},
        {"dim": 1, "lengths": (1.0,), "n_cells": (2,)},
        {"dim": 2, "lengths": (1.0,), "n_cells": (10, 10)},
    ],
)
def test_invalid_grids_are_rejected(kwargs):
    with pytest.raises(DomainError):
        Grid(**kwargs)


def test_field_shape_must_match_grid():
    grid = GridFactory()
    with pytest.raises(GridMismatchError):
        grid.field(np.zeros(grid.size + 1))


def test_fields_on_different_grids_do_not_mix():
    a = GridFactory().zeros()
    b = GridFactory(n_cells=(19,)).zeros()
    with pytest.raises(GridMismatchError):
        a + b
    with pytest.raises(GridMismatchError):
        l2_inner(a.grid, a, b)


def test_field_arithmetic():
    grid = GridFactory()
    f = sine_modes(grid, [((1,), 1.0)])
    np.testing.assert_allclose((2 * f - f).values, f.values)
    assert (f + f).is_finite()


@pytest.mark.parametrize("factory", [GridFactory, SquareGridFactory])
def test_dirichlet_form_matches_laplacian(factory):
    grid = factory()
    rng = np.random.default_rng(3)
    f = grid.field(rng.normal(size=grid.size))
    lap = laplacian_apply(grid, f)
    assert grad_norm_sq(grid, f) == pytest.approx(-l2_inner(grid, lap, f), rel=1e-12)


def test_laplacian_stencil_on_three_nodes():
    grid = Grid.interval(1.0, 3)
    lap = laplacian_apply(grid, grid.field([0.0, 1.0, 0.0]))
    np.testing.assert_allclose(lap.values, [16.0, -32.0, 16.0])


@pytest.mark.parametrize("factory", [GridFactory, SquareGridFactory])
def test_laplacian_is_symmetric(factory):
    grid = factory()
    rng = np.random.default_rng(11)
    f = grid.field(rng.normal(size=grid.size))
    g = grid.field(rng.normal(size=grid.size))
    lap_f = laplacian_apply(grid, f)
    lap_g = laplacian_apply(grid, g)
    scale = math.sqrt(l2_inner(grid, lap_f, lap_f) * l2_inner(grid, g, g))

    assert abs(l2_inner(grid, lap_f, g) - l2_inner(grid, f, lap_g)) <= 1e-12 * scale


def test_sine_modes_are_eigenfunctions():
    grid = SquareGridFactory()
    f = sine_modes(grid, [((2, 3), 1.5)])
    mu = dirichlet_eigenvalue(grid, (2, 3))
    np.testing.assert_allclose(laplacian_apply(grid, f).values, -mu * f.values, atol=1e-10)


def test_sine_modes_rejects_bad_index():
    grid = GridFactory()
    with pytest.raises(DomainError):
        sine_modes(grid, [((0,), 1.0)])
    with pytest.raises(DomainError):
        sine_modes(grid, [((1, 1), 1.0)])


def test_norms_and_quadrature():
    grid = Grid.interval(1.0, 99)
    ones = grid.field(np.ones(grid.shape))
    assert integrate(grid, ones.values) == pytest.approx(0.99)
    assert lp_norm(grid, ones, math.inf) == 1.0
    assert lp_norm(grid, ones, 2) == pytest.approx(math.sqrt(0.99))
    with pytest.raises(DomainError):
        lp_norm(grid, ones, 0.5)


def test_poincare_constant_on_unit_interval():
    grid = Grid.interval(1.0, 199)
    C_p = poincare_constant(grid)
    discrete = 1.0 / math.sqrt(dirichlet_eigenvalue(grid, (1,)))
    assert abs(C_p - discrete) < 1e-10
    assert abs(C_p - 1.0 / math.pi) < 1e-4


def test_poincare_constant_on_unit_square():
    grid = Grid.rectangle((1.0, 1.0), (49, 49))
    assert smallest_eigenvalue(grid) == pytest.approx(
        dirichlet_eigenvalue(grid, (1, 1)), rel=1e-10
    )
    assert poincare_constant(grid) == pytest.approx(1 / (math.pi * math.sqrt(2)), rel=1e-3)


def test_poincare_inequality_on_random_fields():
    grid = Grid.interval(2.0, 63)
    C_p = poincare_constant(grid)
    rng = np.random.default_rng(5)
    for _ in range(1000):
        f = grid.field(rng.normal(size=grid.size))
        assert l2_inner(grid, f, f) <= C_p**2 * grad_norm_sq(grid, f) * (1 + 1e-12)
