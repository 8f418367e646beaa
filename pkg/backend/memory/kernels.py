"""
Prony-series relaxation kernels g(t) = sum_j a_j exp(-b_j t).

Nonnegative weights and positive rates make g >= 0 and g' <= 0 by
construction, and the total mass sum_j a_j / b_j is available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from model.services import Material
from viscowave.exceptions import AdmissibilityError, DomainError


class KernelTerm(NamedTuple):
    a: float
    b: float


@dataclass(frozen=True)
class PronyKernel:
    terms: tuple[KernelTerm, ...] = ()

    def __post_init__(self):
        normalized = tuple(KernelTerm(float(a), float(b)) for a, b in self.terms)
        for term in normalized:
            if not term.a >= 0:
                raise AdmissibilityError(f"kernel weight must be >= 0, got a={term.a}")
            if not term.b > 0:
                raise AdmissibilityError(f"kernel rate must be > 0, got b={term.b}")
        object.__setattr__(self, "terms", normalized)

    @classmethod
    def from_pairs(cls, pairs) -> PronyKernel:
        return cls(tuple(KernelTerm(a, b) for a, b in pairs))

    def __iter__(self) -> Iterator[KernelTerm]:
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def weights(self) -> NDArray[np.float64]:
        return np.array([t.a for t in self.terms], dtype=float)

    @property
    def rates(self) -> NDArray[np.float64]:
        return np.array([t.b for t in self.terms], dtype=float)

    @property
    def is_zero(self) -> bool:
        return all(t.a == 0 for t in self.terms)


def _times(t: ArrayLike) -> NDArray[np.float64]:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("kernel arguments must be nonnegative")
    return t


def _sum_terms(k: PronyKernel, t: NDArray[np.float64], coefficients) -> NDArray:
    if not len(k):
        return np.zeros_like(t)
    return np.tensordot(coefficients, np.exp(-np.multiply.outer(k.rates, t)), axes=1)


def kernel_eval(k: PronyKernel, t: ArrayLike):
    t = _times(t)
    value = _sum_terms(k, t, k.weights)
    return value if value.ndim else float(value)


def kernel_rate_eval(k: PronyKernel, t: ArrayLike):
    """g'(t) = -sum_j a_j b_j exp(-b_j t)."""
    t = _times(t)
    value = _sum_terms(k, t, -k.weights * k.rates)
    return value if value.ndim else float(value)


def kernel_mass(k: PronyKernel) -> float:
    return float(sum(t.a / t.b for t in k.terms))


def kernel_integral(k: PronyKernel, t: float) -> float:
    """Closed-form int_0^t g(s) ds."""
    if t < 0:
        raise DomainError(f"integration bound must be >= 0, got t={t}")
    return float(sum(-term.a * np.expm1(-term.b * t) / term.b for term in k.terms))


@dataclass(frozen=True)
class StiffnessConstants:
    k1: float
    k2: float

    @property
    def k(self) -> float:
        return min(self.k1, self.k2)

    def __iter__(self):
        return iter((self.k1, self.k2, self.k))


def check_admissible(
    k1: PronyKernel, k2: PronyKernel, mat: Material
) -> StiffnessConstants:
    residual = []
    for name, kernel in (("g1", k1), ("g2", k2)):
        value = mat.m0 - kernel_mass(kernel)
        if value <= 0:
            raise AdmissibilityError(
                f"kernel mass exceeds base stiffness: {name} has mass "
                f"{kernel_mass(kernel):.6g} >= m0={mat.m0:.6g} (needs k_i = m0 - mass > 0)"
            )
        residual.append(value)
    return StiffnessConstants(*residual)


@dataclass(frozen=True)
class KernelPair:
    """Relaxation kernels of the u equation (g1) and the v equation (g2)."""

    g1: PronyKernel = PronyKernel()
    g2: PronyKernel = PronyKernel()

    def __iter__(self) -> Iterator[PronyKernel]:
        return iter((self.g1, self.g2))

    @property
    def is_zero(self) -> bool:
        return self.g1.is_zero and self.g2.is_zero
