"""Shared option handling and error-to-exit-code mapping for the commands."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from simulations.config import apply_overrides, collect_overrides, parse_config
from simulations.exit_codes import ExitCode
from simulations.specs import ProblemSpec
from viscowave.exceptions import (
    AdmissibilityError,
    ConfigError,
    DomainError,
    LinearSolverError,
    MemoryFunctionalError,
    SimulationError,
    StabilityError,
)

logger = logging.getLogger(__name__)

NUMERICAL_ERRORS = (LinearSolverError, MemoryFunctionalError, StabilityError)


class SimulationCommand(BaseCommand):
    """Base for commands that read a problem configuration."""

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, type=Path, help="JSON config")
        parser.add_argument("--output-dir", type=Path, default=None)
        parser.add_argument("--stride", type=int, default=None)
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument(
            "--memory-mode", choices=("direct", "prony", "auto"), default=None
        )

    def load_spec(self, options) -> ProblemSpec:
        with self.exit_codes():
            spec = parse_config(options["config"])
            overrides = collect_overrides(
                stride=options.get("stride"),
                seed=options.get("seed"),
                memory_mode=options.get("memory_mode"),
            )
            return apply_overrides(spec, overrides)

    @contextmanager
    def exit_codes(self):
        try:
            yield
        except ConfigError as exc:
            raise CommandError(str(exc), returncode=ExitCode.CONFIG_ERROR) from exc
        except (AdmissibilityError, DomainError) as exc:
            raise CommandError(str(exc), returncode=ExitCode.CONFIG_ERROR) from exc
        except NUMERICAL_ERRORS as exc:
            logger.error("Numerical failure: %s", exc)
            raise CommandError(str(exc), returncode=ExitCode.NUMERICAL_FAILURE) from exc
        except OSError as exc:
            raise CommandError(str(exc), returncode=ExitCode.IO_ERROR) from exc
        except SimulationError as exc:
            raise CommandError(str(exc), returncode=ExitCode.NUMERICAL_FAILURE) from exc
