"""
Refinement studies and the reference problems they run on.

* temporal: the linear single-mode problem against its closed-form solution,
  halving dt.
* spatial: the manufactured solution u = e^-t sin x, v = e^-t sin 2x with
  dt proportional to h, halving h.
* memory: direct against Prony convolution on the small-data problem,
  halving dt.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from grid.services import Grid, dirichlet_eigenvalue, l2_inner
from integrator.config import NumericsConfig
from integrator.oracles import ManufacturedSolution, modal_solution
from integrator.services import run
from memory.kernels import KernelPair, PronyKernel
from model.services import Coupling, Material

from .specs import CertificationConfig, InitialData, Mode, ProblemSpec

logger = logging.getLogger(__name__)

STUDIES = ("temporal", "spatial", "memory")


def modal_spec(
    n_cells: int = 199,
    dt: float = 1e-3,
    t_end: float = 2.0,
    m0: float = 1.0,
    memory_mode: str = "direct",
) -> ProblemSpec:
    """Linear limit: m1 = 0, no memory, no coupling, u0 = sin x on (0, pi)."""
    return ProblemSpec(
        domain=Grid.interval(math.pi, n_cells),
        material=Material(m0=m0),
        numerics=NumericsConfig(dt=dt, t_end=t_end, memory_mode=memory_mode),
        coupling=Coupling(a=0.0, b=0.0, p=1.0),
        initial=InitialData(u0_modes=(Mode((1,), 1.0),)),
        certification=CertificationConfig(enabled=False),
    )


def small_data_spec(
    dt: float = 1e-3,
    t_end: float = 10.0,
    n_cells: int = 199,
    memory_mode: str = "direct",
    kernel: tuple[float, float] = (0.25, 1.0),
    amplitude: float = 0.05,
) -> ProblemSpec:
    g = PronyKernel.from_pairs([kernel])
    return ProblemSpec(
        domain=Grid.interval(math.pi, n_cells),
        material=Material(m0=1.0, m1=0.1, gamma=1.0),
        numerics=NumericsConfig(dt=dt, t_end=t_end, memory_mode=memory_mode),
        kernels=KernelPair(g, g),
        coupling=Coupling(a=1.0, b=1.0, p=1.0),
        initial=InitialData(
            u0_modes=(Mode((1,), amplitude),),
            v0_modes=(Mode((2,), amplitude),),
        ),
    )


def manufactured_spec(
    n_cells: int, t_end: float = 1.0, dt_ratio: float = 0.25
) -> ProblemSpec:
    """Problem whose initial data match ManufacturedSolution's default pair."""
    grid = Grid.interval(math.pi, n_cells)
    steps = math.ceil(t_end / (dt_ratio * grid.h[0]))
    g = PronyKernel.from_pairs([(0.25, 1.0)])
    return ProblemSpec(
        domain=grid,
        material=Material(m0=1.0, m1=0.1, gamma=1.0),
        numerics=NumericsConfig(dt=t_end / steps, t_end=t_end, memory_mode="direct"),
        kernels=KernelPair(g, g),
        coupling=Coupling(a=1.0, b=1.0, p=1.0),
        initial=InitialData(
            u0_modes=(Mode((1,), 1.0),),
            u1_modes=(Mode((1,), -1.0),),
            v0_modes=(Mode((2,), 1.0),),
            v1_modes=(Mode((2,), -1.0),),
        ),
        certification=CertificationConfig(enabled=False),
    )


def observed_orders(errors: Sequence[float], ratio: float = 2.0) -> list[float]:
    return [
        math.log(coarse / fine) / math.log(ratio) if coarse > 0 and fine > 0 else math.nan
        for coarse, fine in zip(errors, errors[1:])
    ]


def _relative_l2(grid: Grid, pairs) -> float:
    error = sum(l2_inner(grid, grid.field(a - b), grid.field(a - b)) for a, b in pairs)
    scale = sum(l2_inner(grid, grid.field(b), grid.field(b)) for _, b in pairs)
    return math.sqrt(error / scale)


def modal_error(spec: ProblemSpec) -> float:
    """Relative L2 error of u at t_end against the closed-form modal solution."""
    grid = spec.domain
    outcome = run(spec)
    final = outcome.last_snapshot
    mu = dirichlet_eigenvalue(grid, (1,))
    amplitude, _ = modal_solution(spec.material.m0, mu, 1.0, 0.0, final.t)
    exact = amplitude * np.sin(grid.axes()[0])
    return _relative_l2(grid, [(final.u.values, exact)])


def manufactured_error(
    n_cells: int, t_end: float = 1.0, solution: ManufacturedSolution | None = None
) -> float:
    spec = manufactured_spec(n_cells, t_end)
    if solution is None:
        solution = ManufacturedSolution(spec.material, spec.kernels, spec.coupling)
    grid = spec.domain
    outcome = run(spec, forcing=solution.forcing(grid))
    final = outcome.last_snapshot
    u, v = solution.exact(grid, final.t)
    return _relative_l2(grid, [(final.u.values, u), (final.v.values, v)])


def temporal_study(
    dts: Sequence[float] = (4e-3, 2e-3, 1e-3),
    n_cells: int = 199,
    t_end: float = 2.0,
) -> dict:
    errors = [modal_error(modal_spec(n_cells, dt, t_end)) for dt in dts]
    return {"dt": list(dts), "error": errors, "order": observed_orders(errors)}


def spatial_study(
    n_cells: Sequence[int] = (49, 99, 199), t_end: float = 1.0
) -> dict:
    base = manufactured_spec(n_cells[0], t_end)
    solution = ManufacturedSolution(base.material, base.kernels, base.coupling)
    errors = [manufactured_error(n, t_end, solution) for n in n_cells]
    h = [Grid.interval(math.pi, n).h[0] for n in n_cells]
    return {
        "n_cells": list(n_cells),
        "h": h,
        "error": errors,
        "order": observed_orders(errors, h[0] / h[1]),
    }


def backend_difference(dt: float, t_end: float = 1.0, n_cells: int = 199) -> float:
    final = {}
    for mode in ("direct", "prony"):
        spec = small_data_spec(dt=dt, t_end=t_end, n_cells=n_cells, memory_mode=mode)
        final[mode] = run(spec).last_snapshot
    grid = final["direct"].u.grid
    return _relative_l2(
        grid,
        [
            (final["prony"].u.values, final["direct"].u.values),
            (final["prony"].v.values, final["direct"].v.values),
        ],
    )


def memory_study(
    dts: Sequence[float] = (4e-3, 2e-3, 1e-3), t_end: float = 1.0
) -> dict:
    differences = [backend_difference(dt, t_end) for dt in dts]
    return {"dt": list(dts), "difference": differences, "order": observed_orders(differences)}


def run_studies(names: Sequence[str] = STUDIES) -> dict:
    runners = {
        "temporal": temporal_study,
        "spatial": spatial_study,
        "memory": memory_study,
    }
    results = {}
    for name in names:
        logger.info("Running %s convergence study", name)
        results[name] = runners[name]()
    return results
