"""
Material law and coupling nonlinearities of the viscoelastic Kirchhoff system.

All functions are pure and accept scalars or numpy arrays (evaluated
pointwise), so the integrator can apply them to whole grid functions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from viscowave.exceptions import AdmissibilityError, DomainError

logger = logging.getLogger(__name__)

SUPPORTED_DIMENSIONS = (1, 2)


@dataclass(frozen=True)
class Material:
    """Kirchhoff stiffness M(s) = m0 + m1 * s**gamma."""

    m0: float
    m1: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.m0 > 0:
            raise AdmissibilityError(
                f"m0 must be positive for M(s)=m0+m1*s^gamma, got m0={self.m0}"
            )
        if not self.m1 >= 0:
            raise AdmissibilityError(f"m1 must be nonnegative, got m1={self.m1}")
        if not self.gamma >= 1:
            raise AdmissibilityError(f"gamma must be >= 1, got gamma={self.gamma}")


@dataclass(frozen=True)
class Coupling:
    """Source nonlinearity constants.

    a = b = 0 is accepted as the linear (decoupled) test mode.
    """

    a: float = 1.0
    b: float = 1.0
    p: float = 1.0
    n: int = 1

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise AdmissibilityError(
                f"coupling constants must be nonnegative, got a={self.a}, b={self.b}"
            )
        if self.n not in SUPPORTED_DIMENSIONS:
            raise AdmissibilityError(
                f"only n in {SUPPORTED_DIMENSIONS} is supported, got n={self.n}"
            )
        if not admissible_p(self.n, self.p):
            raise AdmissibilityError(exponent_bound_message(self.n, self.p))

    @property
    def is_linear(self) -> bool:
        return self.a == 0 and self.b == 0


def exponent_bound_message(n: int, p: float) -> str:
    if n <= 2:
        return f"p must satisfy -1 < p for n={n}, got p={p}"
    return f"p must satisfy -1 < p <= {(3 - n) / (n - 2)} for n={n}, got p={p}"


def kirchhoff_M(s: float, mat: Material) -> float:
    if s < 0:
        raise DomainError(f"M(s) is defined for s >= 0, got s={s}")
    return mat.m0 + mat.m1 * s**mat.gamma


def admissible_p(n: int, p: float) -> bool:
    if n < 1:
        raise DomainError(f"spatial dimension must be >= 1, got n={n}")
    if n <= 2:
        return p > -1
    return -1 < p <= (3 - n) / (n - 2)


def signed_power(x: ArrayLike, q: float) -> NDArray[np.float64]:
    """|x|^q * x written as sign(x)*|x|^(q+1); the value at 0 is 0 for q > -1."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** (q + 1)


def _check_finite(*values: NDArray[np.float64]) -> None:
    for value in values:
        if not np.all(np.isfinite(value)):
            logger.warning("Non-finite argument passed to coupling nonlinearity")
            return


def coupling_f1(u: ArrayLike, v: ArrayLike, c: Coupling) -> NDArray[np.float64] | float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_finite(u, v)
    with np.errstate(over="ignore", invalid="ignore"):
        value = c.a * signed_power(u + v, 2 * (c.p + 1)) + c.b * signed_power(
            u, c.p
        ) * np.abs(v) ** (c.p + 2)
    return value if value.ndim else float(value)


def coupling_f2(u: ArrayLike, v: ArrayLike, c: Coupling) -> NDArray[np.float64] | float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_finite(u, v)
    with np.errstate(over="ignore", invalid="ignore"):
        value = c.a * signed_power(u + v, 2 * (c.p + 1)) + c.b * np.abs(u) ** (
            c.p + 2
        ) * signed_power(v, c.p)
    return value if value.ndim else float(value)


def coupling_F(u: ArrayLike, v: ArrayLike, c: Coupling) -> NDArray[np.float64] | float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_finite(u, v)
    with np.errstate(over="ignore", invalid="ignore"):
        value = (
            c.a * np.abs(u + v) ** (2 * (c.p + 2)) + 2 * c.b * np.abs(u * v) ** (c.p + 2)
        ) / (2 * (c.p + 2))
    return value if value.ndim else float(value)
