"""Prometheus metrics for simulation runs.

Runs are batch jobs, so the registry is dumped to a node-exporter textfile at
the end of a run instead of being scraped over HTTP.
"""

from __future__ import annotations

import logging
from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram
from prometheus_client import write_to_textfile

logger = logging.getLogger(__name__)

REGISTRY = CollectorRegistry(auto_describe=True)

STEPS = Counter(
    "viscowave_steps_total",
    "Time steps advanced by the integrator",
    registry=REGISTRY,
)
RUNS = Counter(
    "viscowave_runs_total",
    "Completed pipeline runs by outcome",
    ["outcome"],
    registry=REGISTRY,
)
STEP_SECONDS = Histogram(
    "viscowave_step_seconds",
    "Wall time of a single integrator step",
    buckets=(1e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 0.1, 0.5, 1.0),
    registry=REGISTRY,
)
ENERGY = Gauge(
    "viscowave_energy",
    "Energy functional at the most recently recorded level",
    registry=REGISTRY,
)
CG_ITERATIONS = Histogram(
    "viscowave_cg_iterations",
    "Conjugate-gradient iterations per linear solve",
    buckets=(1, 2, 5, 10, 20, 50, 100, 200, 500, 1000),
    registry=REGISTRY,
)


def write_metrics(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(path), REGISTRY)
    logger.info("Metrics written to %s", path)
