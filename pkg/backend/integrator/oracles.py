"""
Reference solutions used by the convergence studies and the tests.

``modal_solution`` solves the linear single-mode problem in closed form
through a matrix exponential. ``ManufacturedSolution`` derives, with sympy,
the source terms that make a chosen pair (u, v) an exact solution of the
full nonlinear system with memory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import sympy
from numpy.typing import NDArray
from scipy.linalg import expm

from grid.services import Grid
from memory.kernels import KernelPair, PronyKernel
from model.services import Coupling, Material, coupling_f1, coupling_f2
from viscowave.exceptions import DomainError

logger = logging.getLogger(__name__)


def modal_solution(
    m0: float, mu: float, amplitude: float, velocity: float, t: float
) -> tuple[float, float]:
    """Displacement and velocity of  y'' = -m0 mu y - mu y'  at time t."""
    generator = np.array([[0.0, 1.0], [-m0 * mu, -mu]])
    y = expm(generator * t) @ np.array([amplitude, velocity])
    return float(y[0]), float(y[1])


x, t, s = sympy.symbols("x t s", real=True)


def _kernel_expression(kernel: PronyKernel, lag):
    return sum(
        (
            sympy.nsimplify(term.a) * sympy.exp(-sympy.nsimplify(term.b) * lag)
            for term in kernel
        ),
        sympy.Integer(0),
    )


@dataclass
class ManufacturedSolution:
    """Exact 1D solution pair on (0, L) with compensating sources.

    The linear part of the source (inertia, Kirchhoff, memory and damping
    terms) is derived symbolically; the coupling terms are evaluated
    numerically on the exact fields so that any exponent p is supported.
    """

    material: Material
    kernels: KernelPair
    coupling: Coupling
    length: float = float(np.pi)
    u_expr: str = "exp(-t)*sin(x)"
    v_expr: str = "exp(-t)*sin(2*x)"
    _u: sympy.Expr = field(init=False, repr=False)
    _v: sympy.Expr = field(init=False, repr=False)

    def __post_init__(self):
        namespace = {"x": x, "t": t}
        self._u = sympy.sympify(self.u_expr, locals=namespace)
        self._v = sympy.sympify(self.v_expr, locals=namespace)
        L = sympy.nsimplify(self.length, [sympy.pi])
        for name, expr in (("u", self._u), ("v", self._v)):
            boundary = [sympy.simplify(expr.subs(x, 0)), sympy.simplify(expr.subs(x, L))]
            if any(value != 0 for value in boundary):
                raise DomainError(f"manufactured {name} must vanish on the boundary")
        self._u_fn = sympy.lambdify((x, t), self._u, "numpy")
        self._v_fn = sympy.lambdify((x, t), self._v, "numpy")
        self._s1_fn = self._linear_source(self._u, self.kernels.g1, L)
        self._s2_fn = self._linear_source(self._v, self.kernels.g2, L)
        logger.debug("Derived manufactured sources for u=%s, v=%s", self._u, self._v)

    def _linear_source(self, w, kernel: PronyKernel, L):
        material = self.material
        grad_sq = sympy.integrate(sympy.diff(w, x) ** 2, (x, 0, L))
        stiffness = sympy.nsimplify(material.m0) + sympy.nsimplify(
            material.m1
        ) * grad_sq ** sympy.nsimplify(material.gamma)
        lap = sympy.diff(w, x, 2)
        memory = sympy.integrate(
            _kernel_expression(kernel, t - s) * lap.subs(t, s), (s, 0, t)
        )
        source = (
            sympy.diff(w, t, 2) - stiffness * lap + memory - sympy.diff(lap, t)
        )
        return sympy.lambdify((x, t), sympy.simplify(source), "numpy")

    def _nodes(self, grid: Grid) -> NDArray[np.float64]:
        if grid.dim != 1 or not np.isclose(grid.lengths[0], self.length):
            raise DomainError(f"manufactured solution lives on (0, {self.length})")
        return grid.axes()[0]

    def exact(self, grid: Grid, time: float) -> tuple[NDArray, NDArray]:
        nodes = self._nodes(grid)
        u = np.broadcast_to(self._u_fn(nodes, time), nodes.shape).astype(float)
        v = np.broadcast_to(self._v_fn(nodes, time), nodes.shape).astype(float)
        return u, v

    def forcing(self, grid: Grid):
        """Callable t -> (S1, S2) on the interior nodes of ``grid``."""
        nodes = self._nodes(grid)

        def sources(time: float) -> tuple[NDArray, NDArray]:
            u, v = self.exact(grid, time)
            s1 = np.broadcast_to(self._s1_fn(nodes, time), nodes.shape)
            s2 = np.broadcast_to(self._s2_fn(nodes, time), nodes.shape)
            return (
                s1 - coupling_f1(u, v, self.coupling),
                s2 - coupling_f2(u, v, self.coupling),
            )

        return sources

