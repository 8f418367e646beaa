"""
Volterra convolution histories for the viscoelastic memory terms.

A ``HistoryBuffer`` accumulates Q(t_n) = int_0^{t_n} g(t_n - s) X(s) ds for a
time series X that is recorded one level at a time. Two backends are
available:

* ``direct`` keeps every snapshot and applies the composite trapezoid rule.
* ``prony`` keeps one accumulator per kernel term and advances it by the
  exact integral of the exponential against the linear interpolant of X.

Both backends also return the same integral against g' (the Prony closed form
of the derivative), which the dissipation identity needs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from grid.services import Field, Grid, l2_inner
from memory.kernels import PronyKernel, kernel_eval, kernel_rate_eval
from viscowave.exceptions import HistoryError, MemoryFunctionalError

logger = logging.getLogger(__name__)

NEGATIVE_TOLERANCE = 1e-12
SMALL_RATE = 1e-3
INITIAL_CAPACITY = 64


class MemoryMode(str, Enum):
    DIRECT = "direct"
    PRONY = "prony"


def prony_weights(x: NDArray[np.float64]) -> tuple[NDArray, NDArray, NDArray]:
    """Decay factor and the weights of X_old and X_new for x = b * dt.

    phi1 = (1 - e^-x) / x and phi2 = (1 - e^-x (1 + x)) / x**2; the second
    switches to its Taylor series where the closed form cancels.
    """
    x = np.asarray(x, dtype=float)
    decay = np.exp(-x)
    phi1 = -np.expm1(-x) / x
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = (-np.expm1(-x) - x * decay) / x**2
    series = 0.5 - x / 3 + x**2 / 8 - x**3 / 30 + x**4 / 144
    phi2 = np.where(x < SMALL_RATE, series, closed)
    return decay, phi2, phi1 - phi2


class HistoryBuffer:
    """Convolution history of one scalar or field-valued series against one kernel."""

    def __init__(
        self,
        kernel: PronyKernel,
        dt: float,
        mode: MemoryMode | str,
        shape: tuple[int, ...] = (),
    ):
        if dt <= 0:
            raise HistoryError(f"time step must be positive, got dt={dt}")
        self.kernel = kernel
        self.dt = float(dt)
        self.mode = MemoryMode(mode)
        self.shape = tuple(shape)
        self._levels = 0
        self._cache: dict[bool, NDArray[np.float64]] = {}

        if self.mode is MemoryMode.DIRECT:
            self._snapshots = np.empty((INITIAL_CAPACITY, *self.shape))
            self._table = np.empty(0)
            self._rate_table = np.empty(0)
        else:
            rates = kernel.rates
            self._decay, self._w_old, self._w_new = prony_weights(rates * self.dt)
            self._accumulators = np.zeros((len(kernel), *self.shape))
            self._last: NDArray[np.float64] | None = None

    @property
    def levels(self) -> int:
        return self._levels

    @property
    def step_index(self) -> int:
        """Index n of the most recent level, -1 when nothing was recorded."""
        return self._levels - 1

    def snapshots(self) -> NDArray[np.float64]:
        if self.mode is not MemoryMode.DIRECT:
            raise HistoryError("prony histories do not keep snapshots")
        return self._snapshots[: self._levels]

    def append(self, X: ArrayLike) -> None:
        X = np.asarray(X, dtype=float)
        if X.shape != self.shape:
            raise HistoryError(f"expected a value of shape {self.shape}, got {X.shape}")
        self._cache.clear()
        if self.mode is MemoryMode.DIRECT:
            if self._levels == len(self._snapshots):
                grown = np.empty((2 * len(self._snapshots), *self.shape))
                grown[: self._levels] = self._snapshots[: self._levels]
                self._snapshots = grown
            self._snapshots[self._levels] = X
        elif self._last is not None:
            convolve_prony_step(self, X, self._last, self.dt)
        self._last = X.copy() if self.mode is MemoryMode.PRONY else None
        self._levels += 1

    def value(self, derivative: bool = False) -> NDArray[np.float64]:
        """Convolution at the most recent level, against g or against g'."""
        if self._levels == 0:
            raise HistoryError("history is empty")
        if derivative not in self._cache:
            if self.mode is MemoryMode.DIRECT:
                result = convolve_direct(
                    self, self.kernel, self.dt, self.step_index, derivative
                )
            else:
                result = _prony_value(self, derivative)
            self._cache[derivative] = result
        return self._cache[derivative]

    def record(self, X: ArrayLike) -> NDArray[np.float64]:
        self.append(X)
        return self.value()

    def kernel_table(self, size: int, derivative: bool = False) -> NDArray[np.float64]:
        """g(m dt) (or g'(m dt)) for m = 0..size-1, grown by doubling."""
        table = self._rate_table if derivative else self._table
        if len(table) < size:
            capacity = max(size, 2 * len(table), INITIAL_CAPACITY)
            lags = self.dt * np.arange(capacity)
            evaluate = kernel_rate_eval if derivative else kernel_eval
            table = np.asarray(evaluate(self.kernel, lags), dtype=float)
            if derivative:
                self._rate_table = table
            else:
                self._table = table
        return table[:size]


def convolve_direct(
    history: HistoryBuffer,
    k: PronyKernel,
    dt: float,
    n: int,
    derivative: bool = False,
) -> NDArray[np.float64]:
    """Composite trapezoid over snapshots 0..n with weights dt * g(t_n - t_j)."""
    if history.mode is not MemoryMode.DIRECT:
        raise HistoryError("convolve_direct needs a direct-mode history")
    if history.levels < n + 1:
        raise HistoryError(
            f"history holds {history.levels} levels, step {n} needs {n + 1}"
        )
    if n == 0 or not len(k):
        return np.zeros(history.shape)
    if k is history.kernel and dt == history.dt:
        lags = history.kernel_table(n + 1, derivative)[::-1]
    else:
        evaluate = kernel_rate_eval if derivative else kernel_eval
        lags = np.asarray(evaluate(k, dt * np.arange(n, -1, -1)), dtype=float)
    weights = dt * lags
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return np.tensordot(weights, history.snapshots()[: n + 1], axes=1)


def convolve_prony_step(
    state: HistoryBuffer,
    X_new: ArrayLike,
    X_old: ArrayLike,
    dt: float,
) -> tuple[HistoryBuffer, NDArray[np.float64]]:
    """Advance every Prony accumulator from t_n to t_n + dt.

    A_j <- e^{-b_j dt} A_j + dt (phi2 X_old + (phi1 - phi2) X_new), which is
    exact when X is linear on the step.
    """
    if state.mode is not MemoryMode.PRONY:
        raise HistoryError("convolve_prony_step needs a prony-mode history")
    X_new = np.asarray(X_new, dtype=float)
    X_old = np.asarray(X_old, dtype=float)
    if dt == state.dt:
        decay, w_old, w_new = state._decay, state._w_old, state._w_new
    else:
        decay, w_old, w_new = prony_weights(state.kernel.rates * dt)
    expand = (slice(None),) + (np.newaxis,) * X_new.ndim
    state._accumulators = (
        decay[expand] * state._accumulators
        + (dt * w_old)[expand] * X_old
        + (dt * w_new)[expand] * X_new
    )
    if not np.all(np.isfinite(state._accumulators)):
        logger.warning("Non-finite Prony accumulator after step of size %g", dt)
    state._cache.clear()
    return state, _prony_value(state, derivative=False)


def _prony_value(state: HistoryBuffer, derivative: bool) -> NDArray[np.float64]:
    coefficients = state.kernel.weights
    if derivative:
        coefficients = -coefficients * state.kernel.rates
    if not len(coefficients):
        return np.zeros(state.shape)
    return np.tensordot(coefficients, state._accumulators, axes=1)


@dataclass
class MemoryTrack:
    """The three histories that determine the memory terms of one field.

    ``laplacian`` integrates the Laplacian of w (the convolution in the
    equation of motion), ``grad_sq`` integrates ||grad w||^2 and ``unit``
    integrates 1. Together they expand (g o grad w)(t_n).
    """

    grid: Grid
    kernel: PronyKernel
    dt: float
    mode: MemoryMode
    laplacian: HistoryBuffer = field(init=False)
    grad_sq: HistoryBuffer = field(init=False)
    unit: HistoryBuffer = field(init=False)
    clamped: int = field(default=0, init=False)

    def __post_init__(self):
        self.mode = MemoryMode(self.mode)
        self.laplacian = HistoryBuffer(self.kernel, self.dt, self.mode, self.grid.shape)
        self.grad_sq = HistoryBuffer(self.kernel, self.dt, self.mode)
        self.unit = HistoryBuffer(self.kernel, self.dt, self.mode)

    @property
    def step_index(self) -> int:
        return self.laplacian.step_index

    def record(self, lap: Field, grad_sq: float) -> Field:
        """Store level n and return the convolution of the Laplacian at t_n."""
        self.grad_sq.append(grad_sq)
        self.unit.append(1.0)
        return Field(self.laplacian.record(lap.values), self.grid)

    def convolution(self, derivative: bool = False) -> Field:
        return Field(self.laplacian.value(derivative), self.grid)


def g_circ(
    track: MemoryTrack, w: Field, grad_sq: float, derivative: bool = False
) -> float:
    """(g o grad w)(t_n) for the most recent level of ``track``.

    ||grad w(t) - grad w(s)||^2 is expanded into ||grad w(t)||^2 + ||grad w(s)||^2
    + 2 <w(t), lap w(s)>, so every piece is a convolution the track already
    holds. With ``derivative`` the kernel is g' and the result is <= 0.
    """
    buffers = (track.laplacian, track.grad_sq, track.unit)
    if len({b.mode for b in buffers}) != 1:
        raise MemoryFunctionalError(
            "memory histories use different modes",
            {"modes": [b.mode.value for b in buffers]},
        )
    if len({b.levels for b in buffers}) != 1:
        raise HistoryError(
            f"memory histories are out of step: {[b.levels for b in buffers]}"
        )
    if track.step_index <= 0:
        return 0.0

    q_unit = float(track.unit.value(derivative))
    q_grad = float(track.grad_sq.value(derivative))
    q_cross = 2.0 * l2_inner(track.grid, track.convolution(derivative), w)
    parts = (grad_sq * q_unit, q_grad, q_cross)
    value = math.fsum(parts)

    sign = -1.0 if derivative else 1.0
    signed = sign * value
    if signed >= 0:
        return value
    # relative to the cancelling terms, 1e-12 absolute below unit size; see DESIGN.md
    scale = max(1.0, sum(abs(part) for part in parts))
    if signed >= -NEGATIVE_TOLERANCE * scale:
        if not track.clamped:
            logger.warning(
                "Clamped memory functional %.3e to zero at step %d",
                value,
                track.step_index,
            )
        track.clamped += 1
        return 0.0
    raise MemoryFunctionalError(
        f"memory functional has the wrong sign: {value:.6e}",
        {
            "step": track.step_index,
            "derivative": derivative,
            "grad_sq": grad_sq,
            "unit_integral": q_unit,
            "grad_sq_integral": q_grad,
            "cross_term": q_cross,
            "mode": track.mode.value,
        },
    )
