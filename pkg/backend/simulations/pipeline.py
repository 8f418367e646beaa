"""
Run orchestration: simulate, record the energy series, certify, write files.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path

from django.conf import settings

from certify.services import (
    CertificationReport,
    WellMonitor,
    build_report,
    decay_fit,
    report_to_dict,
)
from energetics.services import EnergyRecord, EnergyRecorder, compute_E
from integrator.services import Forcing, initialize, run
from viscowave.metrics import RUNS, write_metrics

from .config import dump_spec
from .exit_codes import outcome_code
from .specs import ProblemSpec, SimResult

logger = logging.getLogger(__name__)

SERIES_HEADER = (
    "t",
    "E",
    "I",
    "J",
    "kinetic",
    "memory",
    "potential",
    "dissipation_residual",
    "alpha_t",
)


class TrajectoryCertifier:
    """Energy listener that builds the report on level 0 and then monitors the well."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.report: CertificationReport | None = None
        self.monitor: WellMonitor | None = None

    def __call__(self, record: EnergyRecord) -> None:
        if self.report is None:
            self.report = certify_initial(self.spec, record)
            self.monitor = WellMonitor(self.report)
        self.monitor(record)


def certify_initial(spec: ProblemSpec, initial: EnergyRecord) -> CertificationReport:
    options = spec.certification
    return build_report(
        spec,
        initial,
        eta_budget=options.eta_budget,
        refinement_steps=options.eta_refinement_steps,
        modes=options.eta_modes,
        seed=spec.seed,
        audit_samples=options.eta_audit_samples,
    )


def certify_only(spec: ProblemSpec) -> CertificationReport:
    """Constants and initial-data hypotheses without time stepping."""
    state = initialize(
        spec,
        direct_max_steps=settings.VISCOWAVE["DIRECT_MAX_STEPS"],
        check_stability=False,
    )
    return certify_initial(spec, compute_E(state.snapshot, spec))


def run_pipeline(
    spec: ProblemSpec,
    certify: bool | None = None,
    forcing: Forcing | None = None,
) -> SimResult:
    if certify is None:
        certify = spec.certification.enabled
    certifier = TrajectoryCertifier(spec) if certify else None
    recorder = EnergyRecorder(spec, listeners=[certifier] if certifier else [])
    try:
        outcome = run(
            spec,
            observers=[recorder],
            forcing=forcing,
            stride=spec.outputs.stride,
            direct_max_steps=settings.VISCOWAVE["DIRECT_MAX_STEPS"],
        )
    except Exception:
        RUNS.labels(outcome="error").inc()
        raise

    report = certifier.report if certifier else None
    if report is not None:
        decay_fit(recorder.records, report)
        if outcome.diverged:
            report.note(f"run diverged at t={outcome.diverged_at:g}")

    result = SimResult(
        series=recorder.records,
        report=report,
        diverged=outcome.diverged,
        diverged_at=outcome.diverged_at,
        steps=outcome.steps,
        memory_mode=outcome.memory_mode.value,
        wall_time=outcome.wall_time,
        energy_violations=recorder.violations(),
        clamped_memory=outcome.clamped_memory,
    )
    code = outcome_code(result)
    RUNS.labels(outcome=code.name.lower()).inc()
    logger.info(
        "Pipeline finished: %d records, outcome %s, %.2fs",
        len(result.series),
        code.name,
        result.wall_time,
    )
    return result


def _number(value: float) -> str:
    return format(value, ".17g")


def write_series(records: list[EnergyRecord], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SERIES_HEADER)
        for r in records:
            writer.writerow(
                _number(x)
                for x in (
                    r.t,
                    r.E_value,
                    r.I_value,
                    r.J_value,
                    r.kinetic,
                    r.memory,
                    r.potential,
                    r.dissipation_residual,
                    r.alpha,
                )
            )


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def report_document(result: SimResult, spec: ProblemSpec) -> dict:
    document = report_to_dict(result.report) if result.report else {}
    document["run"] = {
        "diverged": result.diverged,
        "diverged_at": _clean(result.diverged_at),
        "steps": result.steps,
        "records": len(result.series),
        "memory_mode": result.memory_mode,
        "energy_monotone_violations": len(result.energy_violations),
        "clamped_memory": result.clamped_memory,
        "exit_code": int(outcome_code(result)),
    }
    document["config"] = dump_spec(spec)
    return document


def _resolve(path: str, output_dir: Path | None) -> Path:
    candidate = Path(path)
    if output_dir is not None and not candidate.is_absolute():
        candidate = output_dir / candidate
    candidate.parent.mkdir(parents=True, exist_ok=True)
    return candidate


def write_outputs(
    result: SimResult, spec: ProblemSpec, output_dir: Path | None = None
) -> list[Path]:
    """Write the CSV series, the JSON report and optionally the metrics textfile."""
    if output_dir is None:
        output_dir = settings.VISCOWAVE.get("OUTPUT_DIR")
    output_dir = Path(output_dir) if output_dir is not None else None

    written = []
    series_path = _resolve(spec.outputs.series_path, output_dir)
    write_series(result.series, series_path)
    written.append(series_path)

    if result.report is not None:
        report_path = _resolve(spec.outputs.report_path, output_dir)
        report_path.write_text(
            json.dumps(report_document(result, spec), indent=2, allow_nan=False)
            + "\n",
            encoding="utf-8",
        )
        written.append(report_path)

    if spec.outputs.metrics_path:
        metrics_path = _resolve(spec.outputs.metrics_path, output_dir)
        write_metrics(metrics_path)
        written.append(metrics_path)

    logger.info("Wrote %s", ", ".join(str(p) for p in written))
    return written
