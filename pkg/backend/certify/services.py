"""
Certification of the potential-well stability and exponential decay results.

The pipeline builds a ``CertificationReport`` in three passes:

1. ``build_report`` estimates the Sobolev-type constant eta on the discrete
   space, derives the well thresholds (B, alpha*, E1), the decay constants
   (C1, C3, C0) and checks the initial-data hypotheses.
2. ``WellMonitor`` listens to the energy recorder and checks, level by level,
   that the trajectory stays inside the well together with the pointwise
   inequalities that keep it there.
3. ``decay_fit`` fits the observed decay rate and compares the series with
   the exponential bounds.

Eta is a lower estimate of the optimal constant (a maximum over a finite
family of smooth fields), so every check reads "holds for the computed eta".
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import cumulative_trapezoid

from energetics.services import EnergyRecord
from grid.services import Field, Grid, grad_norm_sq, integrate, poincare_constant
from memory.kernels import StiffnessConstants, check_admissible
from model.services import Coupling
from viscowave.exceptions import DomainError

if TYPE_CHECKING:
    from simulations.specs import ProblemSpec

logger = logging.getLogger(__name__)

AUDIT_SLACK = 1e-10
G_SLACK = 1e-8
UNDERFLOW_FRACTION = 1e-14
FIT_WINDOW_START = 0.2
MIN_FIT_SAMPLES = 10
ASCENT_STARTS = 3
ASCENT_STEP = 0.1
ASCENT_DECAY = 0.98


@dataclass
class CertificationReport:
    p: float
    eta_estimate: float
    B: float
    alpha_star: float
    E1: float
    k1: float
    k2: float
    k: float
    C_p: float
    C1: float
    C3: float
    C0: float
    lambda_value: float = math.nan
    E0: float = math.nan
    initial_well_norm: float = math.nan
    hyp_E0_below_E1: bool | None = None
    hyp_initial_in_well: bool | None = None
    hyp_lambda_positive: bool | None = None
    trajectory_in_well: bool | None = None
    fitted_rate: float | None = None
    fit_available: bool = False
    theorem_rate_bound: float | None = None
    proof_rate_bound: float | None = None
    bound_satisfied: bool | None = None
    proof_bound_satisfied: bool | None = None
    bound_samples: int = 0
    proof_bound_samples: int = 0
    decay_ratio_empirical: float | None = None
    decay_ratio_bound: float | None = None
    decay_theorem_applicable: bool = True
    monitored_levels: int = 0
    well_violations: int = 0
    G_violations: int = 0
    I_negative: int = 0
    J_bound_violations: int = 0
    gradient_bound_violations: int = 0
    velocity_bound_violations: int = 0
    max_alpha: float = 0.0
    max_regularity: float = 0.0
    eta_audit_violations: int | None = None
    seed: int | None = None
    mesh: dict = field(default_factory=dict)
    eta_search: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def hypotheses_hold(self) -> bool:
        return bool(
            self.hyp_E0_below_E1 and self.hyp_initial_in_well and self.hyp_lambda_positive
        )

    def note(self, message: str) -> None:
        if message not in self.notes:
            self.notes.append(message)
            logger.info("Certification note: %s", message)


# Eta search


def well_ratio(
    grid: Grid, u: Field, v: Field, k1: float, k2: float, c: Coupling
) -> float:
    """(a |u+v|^{2(p+2)}_{2(p+2)} + 2b |uv|^{p+2}_{p+2}) / (k1|grad u|^2 + k2|grad v|^2)^{p+2}.

    Returns nan when the denominator vanishes.
    """
    q = c.p + 2
    denominator = k1 * grad_norm_sq(grid, u) + k2 * grad_norm_sq(grid, v)
    if not denominator > 0:
        return math.nan
    numerator = c.a * integrate(grid, np.abs(u.values + v.values) ** (2 * q))
    numerator += 2 * c.b * integrate(grid, np.abs(u.values * v.values) ** q)
    return numerator / denominator**q


class _SineFamily:
    """Random truncated sine series in both fields, parameterised by one vector."""

    def __init__(self, grid: Grid, modes: int):
        self.grid = grid
        self.modes = tuple(min(modes, n) for n in grid.n_cells)
        self.bases = [
            np.sin(np.outer(np.arange(1, m + 1), np.pi * x / L))
            for m, x, L in zip(self.modes, grid.axes(), grid.lengths)
        ]
        self.block = math.prod(self.modes)

    @property
    def size(self) -> int:
        return 2 * self.block

    def field(self, coefficients: NDArray[np.float64]) -> Field:
        if self.grid.dim == 1:
            values = coefficients @ self.bases[0]
        else:
            values = self.bases[0].T @ coefficients.reshape(self.modes) @ self.bases[1]
        return Field(values, self.grid)

    def fields(self, theta: NDArray[np.float64]) -> tuple[Field, Field]:
        return self.field(theta[: self.block]), self.field(theta[self.block :])

    def draw(self, rng: np.random.Generator) -> NDArray[np.float64]:
        theta = rng.standard_normal(self.size)
        return theta / np.linalg.norm(theta)


def _ratio(family, theta, k1, k2, c) -> float:
    u, v = family.fields(theta)
    return well_ratio(family.grid, u, v, k1, k2, c)


def _ascend(family, theta, k1, k2, c, steps: int) -> tuple[float, NDArray]:
    best = _ratio(family, theta, k1, k2, c)
    for s in range(steps):
        size = ASCENT_STEP * ASCENT_DECAY**s
        for i in range(family.size):
            for direction in (1.0, -1.0):
                trial = theta.copy()
                trial[i] += direction * size
                norm = np.linalg.norm(trial)
                if norm == 0:
                    continue
                trial /= norm
                value = _ratio(family, trial, k1, k2, c)
                if value > best:
                    best, theta = value, trial
                    break
    return best, theta


def estimate_eta(
    grid: Grid,
    k1: float,
    k2: float,
    c: Coupling,
    budget: int = 64,
    seed: int = 0,
    refinement_steps: int = 200,
    modes: int = 8,
) -> float:
    """Lower estimate of the best eta with
    a|u+v|^{2(p+2)} + 2b|uv|^{p+2} <= eta (k1|grad u|^2 + k2|grad v|^2)^{p+2}.

    ``budget`` random sine-series pairs are scored, then the best few are
    refined by coordinate ascent with a geometrically shrinking step.
    """
    if c.is_linear:
        return 0.0
    if budget < 1:
        raise DomainError(f"eta budget must be at least 1, got {budget}")
    rng = np.random.default_rng(seed)
    family = _SineFamily(grid, modes)
    scored = []
    skipped = 0
    for _ in range(budget):
        theta = family.draw(rng)
        value = _ratio(family, theta, k1, k2, c)
        if math.isnan(value):
            skipped += 1
            continue
        scored.append((value, theta))
    if not scored:
        raise DomainError("every eta candidate had a vanishing gradient norm")
    scored.sort(key=lambda item: item[0], reverse=True)
    eta = scored[0][0]
    for value, theta in scored[:ASCENT_STARTS]:
        refined, _ = _ascend(family, theta, k1, k2, c, refinement_steps)
        eta = max(eta, refined)
    logger.info(
        "Estimated eta=%.6g from %d candidates (%d skipped), modes=%s",
        eta,
        len(scored),
        skipped,
        family.modes,
    )
    return eta


def audit_eta(
    grid: Grid,
    eta: float,
    k1: float,
    k2: float,
    c: Coupling,
    samples: int = 1000,
    seed: int = 0,
    modes: int = 8,
) -> int:
    """Fresh random pairs whose ratio exceeds eta."""
    rng = np.random.default_rng([seed, 1])
    family = _SineFamily(grid, modes)
    violations = 0
    for _ in range(samples):
        value = _ratio(family, family.draw(rng), k1, k2, c)
        if not math.isnan(value) and value > eta * (1 + 1e-12):
            violations += 1
    if violations:
        logger.warning("eta=%g violated by %d of %d samples", eta, violations, samples)
    return violations


# Thresholds and constants


class Thresholds(NamedTuple):
    B: float
    alpha_star: float
    E1: float


def G(alpha: float, eta: float, p: float) -> float:
    """1/2 alpha^2 - B^{2(p+2)} / (2(p+2)) alpha^{2(p+2)} with B^{2(p+2)} = eta."""
    q = p + 2
    return 0.5 * alpha**2 - eta / (2 * q) * alpha ** (2 * q)


def thresholds(eta: float, p: float) -> Thresholds:
    if eta < 0:
        raise DomainError(f"eta must be nonnegative, got {eta}")
    if eta == 0:
        return Thresholds(0.0, math.inf, math.inf)
    q = p + 2
    B = eta ** (1 / (2 * q))
    alpha_star = B ** (-q / (p + 1))
    E1 = (0.5 - 1 / (2 * q)) * alpha_star**2
    level = G(alpha_star, eta, p)
    if not math.isclose(level, E1, rel_tol=1e-12, abs_tol=0.0):
        logger.warning("G(alpha*)=%r differs from E1=%r", level, E1)
    return Thresholds(B, alpha_star, E1)


def lambda_value(eta: float, E0: float, p: float, m0: float, k: float) -> float:
    """1 - eta (2(p+2) E0 / (p+1))^{p+1} - 5 (m0 - k)(p+2) / (2k(p+1))."""
    return (
        1
        - eta * (2 * (p + 2) * E0 / (p + 1)) ** (p + 1)
        - 5 * (m0 - k) * (p + 2) / (2 * k * (p + 1))
    )


def decay_constants(p: float, k: float, C_p: float) -> tuple[float, float, float]:
    C1 = (p + 2) / (k * (p + 1)) * C_p**2 + 1
    C3 = 2 * (p + 2) / (k * (p + 1))
    C0 = 2 * C1 + 2 * C_p**2 + C3
    return C1, C3, C0


def theorem_constants(
    spec: ProblemSpec, grid: Grid, C_p: float | None = None
) -> tuple[float, float, float]:
    constants = check_admissible(spec.kernels.g1, spec.kernels.g2, spec.material)
    if C_p is None:
        C_p = poincare_constant(grid)
    return decay_constants(spec.coupling.p, constants.k, C_p)


# Report assembly


def build_report(
    spec: ProblemSpec,
    initial: EnergyRecord,
    eta_budget: int = 64,
    refinement_steps: int = 200,
    modes: int = 8,
    seed: int = 0,
    audit_samples: int = 0,
) -> CertificationReport:
    grid = spec.domain
    coupling = spec.coupling
    constants = check_admissible(spec.kernels.g1, spec.kernels.g2, spec.material)
    eta = estimate_eta(
        grid,
        constants.k1,
        constants.k2,
        coupling,
        budget=eta_budget,
        seed=seed,
        refinement_steps=refinement_steps,
        modes=modes,
    )
    B, alpha_star, E1 = thresholds(eta, coupling.p)
    C_p = poincare_constant(grid)
    C1, C3, C0 = decay_constants(coupling.p, constants.k, C_p)
    report = CertificationReport(
        p=coupling.p,
        eta_estimate=eta,
        B=B,
        alpha_star=alpha_star,
        E1=E1,
        k1=constants.k1,
        k2=constants.k2,
        k=constants.k,
        C_p=C_p,
        C1=C1,
        C3=C3,
        C0=C0,
        seed=seed,
        mesh={
            "dim": grid.dim,
            "lengths": list(grid.lengths),
            "n_cells": list(grid.n_cells),
            "h": list(grid.h),
            "dt": spec.numerics.dt,
        },
        eta_search={
            "budget": eta_budget,
            "refinement_steps": refinement_steps,
            "modes": modes,
        },
    )
    if coupling.is_linear:
        report.note(
            "coupling a=b=0: the source vanishes, eta=0 and every state lies in the well"
        )
    if spec.kernels.is_zero:
        report.decay_theorem_applicable = False
        report.note(
            "memory kernels vanish: the decay theorem needs a kernel of positive "
            "mass, its rate bound is reported for information only"
        )
    if audit_samples and eta > 0:
        report.eta_audit_violations = audit_eta(
            grid, eta, constants.k1, constants.k2, coupling, audit_samples, seed, modes
        )
    return check_hypotheses(report, initial, spec)


def check_hypotheses(
    report: CertificationReport, initial: EnergyRecord, spec: ProblemSpec
) -> CertificationReport:
    E0 = initial.E_value
    report.E0 = E0
    report.initial_well_norm = math.sqrt(
        report.k1 * initial.grad_u_sq + report.k2 * initial.grad_v_sq
    )
    report.hyp_E0_below_E1 = bool(E0 < report.E1)
    report.hyp_initial_in_well = bool(report.initial_well_norm < report.alpha_star)
    report.lambda_value = lambda_value(
        report.eta_estimate, E0, report.p, spec.material.m0, report.k
    )
    report.hyp_lambda_positive = bool(report.lambda_value > 0)
    if report.hyp_lambda_positive:
        report.theorem_rate_bound = report.lambda_value / report.C0
        report.proof_rate_bound = 2 * report.lambda_value / report.C0
        report.decay_ratio_bound = report.C0 / (2 * report.lambda_value)
    else:
        report.note(
            f"lambda={report.lambda_value:.6g} is not positive: the kernel mass "
            "relative to k or E(0) is too large for the exponential bound"
        )
    logger.info(
        "Hypotheses: E0<E1=%s, initial in well=%s, lambda>0=%s (lambda=%.6g)",
        report.hyp_E0_below_E1,
        report.hyp_initial_in_well,
        report.hyp_lambda_positive,
        report.lambda_value,
    )
    return report


def well_invariant_monitor(record: EnergyRecord, report: CertificationReport) -> bool:
    """alpha(t) < alpha* at one recorded level."""
    return bool(record.alpha < report.alpha_star)


class WellMonitor:
    """Energy-series listener that audits the well invariant level by level."""

    def __init__(self, report: CertificationReport):
        self.report = report
        self.constants = StiffnessConstants(report.k1, report.k2)

    def __call__(self, record: EnergyRecord) -> bool:
        report = self.report
        p = report.p
        report.monitored_levels += 1
        if math.isfinite(record.regularity):
            report.max_regularity = max(report.max_regularity, record.regularity)
        if math.isfinite(record.alpha):
            report.max_alpha = max(report.max_alpha, record.alpha)

        inside = well_invariant_monitor(record, report)
        report.trajectory_in_well = inside and report.trajectory_in_well is not False
        if not inside:
            report.well_violations += 1
            if report.well_violations == 1:
                logger.warning(
                    "Trajectory left the well at t=%g: alpha=%g >= alpha*=%g",
                    record.t,
                    record.alpha,
                    report.alpha_star,
                )
            return False

        if not G(record.alpha, report.eta_estimate, p) <= record.E_value + G_SLACK:
            report.G_violations += 1
        if record.I_value < -AUDIT_SLACK:
            report.I_negative += 1
        else:
            if record.J_value < (p + 1) / (2 * (p + 2)) * record.alpha**2 - AUDIT_SLACK:
                report.J_bound_violations += 1
            gradient = report.k * (record.grad_u_sq + record.grad_v_sq)
            if gradient > 2 * (p + 2) / (p + 1) * record.E_value + AUDIT_SLACK:
                report.gradient_bound_violations += 1
        if record.J_value >= 0 and record.velocity_sq > 2 * record.E_value + AUDIT_SLACK:
            report.velocity_bound_violations += 1
        return True


# Decay


def _truncate(series: Sequence[EnergyRecord]) -> tuple[NDArray, NDArray]:
    t = np.array([r.t for r in series], dtype=float)
    E = np.array([r.E_value for r in series], dtype=float)
    finite = np.isfinite(E)
    if not finite.all():
        stop = int(np.argmin(finite))
        t, E = t[:stop], E[:stop]
    if len(E) and E[0] > 0:
        small = np.flatnonzero(E < UNDERFLOW_FRACTION * E[0])
        if len(small):
            t, E = t[: small[0]], E[: small[0]]
    return t, E


def fit_rate(t: NDArray, E: NDArray) -> float:
    slope, _ = np.polyfit(t, np.log(E), 1)
    return float(-slope)


def _bound_check(t, E, E0, rate, start) -> tuple[bool, int]:
    mask = t >= start
    bound = E0 * np.exp(1 - rate * t[mask])
    return bool(np.all(E[mask] <= bound)), int(mask.sum())


def decay_ratio(t: NDArray, E: NDArray) -> float | None:
    """max_t (int_t^T E ds) / E(t) with the trapezoid rule."""
    if len(E) < 2:
        return None
    cumulative = cumulative_trapezoid(E, t, initial=0.0)
    tail = cumulative[-1] - cumulative
    positive = E > 0
    if not positive.any():
        return None
    return float(np.max(tail[positive] / E[positive]))


def decay_fit(
    series: Sequence[EnergyRecord], report: CertificationReport
) -> CertificationReport:
    if not series:
        report.note("empty energy series: no decay fit")
        return report
    T = series[-1].t
    E0 = series[0].E_value
    t, E = _truncate(series)
    report.decay_ratio_empirical = decay_ratio(t, E)

    window = (t >= FIT_WINDOW_START * T) & (E > 0)
    if not E0 > 0:
        report.note("E(0) is not positive: nothing to decay")
    elif window.sum() < MIN_FIT_SAMPLES:
        report.note(
            f"decay fit unavailable: {int(window.sum())} samples in the fit window"
        )
    else:
        report.fit_available = True
        report.fitted_rate = fit_rate(t[window], E[window])
        logger.info(
            "Fitted decay rate %.6g over t in [%g, %g]",
            report.fitted_rate,
            t[window][0],
            t[window][-1],
        )

    if not report.hyp_lambda_positive or not E0 > 0:
        report.bound_satisfied = None
        report.proof_bound_satisfied = None
        return report

    C0, lam = report.C0, report.lambda_value
    report.bound_satisfied, report.bound_samples = _bound_check(
        t, E, E0, lam / C0, C0 / lam
    )
    report.proof_bound_satisfied, report.proof_bound_samples = _bound_check(
        t, E, E0, 2 * lam / C0, C0 / (2 * lam)
    )
    if report.bound_samples == 0:
        report.note(
            f"run ends before t=C0/lambda={C0 / lam:.6g}: the decay bound holds vacuously"
        )
    if not report.bound_satisfied:
        logger.warning("Energy exceeds the exponential bound E(0)exp(1 - lambda t/C0)")
    return report


def report_to_dict(report: CertificationReport) -> dict:
    """JSON-ready mapping; non-finite numbers become null."""

    def clean(value):
        if isinstance(value, float) and not math.isfinite(value):
            return None
        if isinstance(value, dict):
            return {key: clean(item) for key, item in value.items()}
        if isinstance(value, list):
            return [clean(item) for item in value]
        return value

    data = clean(asdict(report))
    data["lambda"] = data.pop("lambda_value")
    data["hypotheses_hold"] = report.hypotheses_hold
    return data
