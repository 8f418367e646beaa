"""
Loading, dumping and overriding problem configurations.

Precedence for the overridable settings: command-line flag, then the
``VISCO_*`` environment variable (read in settings), then the config file,
then the built-in default.
"""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any

from django.conf import settings

from viscowave.exceptions import ConfigError, DomainError

from .serializers import ProblemSpecSerializer
from .specs import ProblemSpec

logger = logging.getLogger(__name__)

OVERRIDE_KEYS = {
    "MEMORY_MODE": ("numerics", "memory_mode"),
    "DIVERGENCE_THRESHOLD": ("numerics", "divergence_threshold"),
    "CG_TOLERANCE": ("numerics", "cg_tolerance"),
    "CG_MAX_ITERATIONS": ("numerics", "cg_max_iterations"),
    "CFL_SAFETY": ("numerics", "cfl_safety"),
    "STRIDE": ("outputs", "stride"),
    "METRICS_TEXTFILE": ("outputs", "metrics_path"),
    "ETA_BUDGET": ("certification", "eta_budget"),
    "SEED": (None, "seed"),
}


def flatten_errors(errors: Any, prefix: str = "") -> list[str]:
    """Turn nested DRF errors into ``section.field[i].key: message`` lines."""
    if isinstance(errors, dict):
        lines = []
        for key, value in errors.items():
            if key == "non_field_errors":
                path = prefix
            elif isinstance(key, int):
                path = f"{prefix}[{key}]"
            else:
                path = f"{prefix}.{key}" if prefix else str(key)
            lines.extend(flatten_errors(value, path))
        return lines
    if isinstance(errors, list):
        if all(isinstance(item, (str,)) for item in errors):
            return [f"{prefix or '<root>'}: {item}" for item in errors]
        lines = []
        for i, item in enumerate(errors):
            if item:
                lines.extend(flatten_errors(item, f"{prefix}[{i}]"))
        return lines
    return [f"{prefix or '<root>'}: {errors}"]


def parse_config_data(data: Any, source: str = "<config>") -> ProblemSpec:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: the configuration must be a JSON object")
    serializer = ProblemSpecSerializer(data=data)
    if not serializer.is_valid():
        errors = flatten_errors(serializer.errors)
        logger.error("Invalid configuration %s: %s", source, "; ".join(errors))
        raise ConfigError(f"{source}: invalid configuration", errors)
    return serializer.save()


def parse_config(path: str | Path) -> ProblemSpec:
    """Read and validate a JSON config; OSError propagates for unreadable files."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: malformed JSON ({exc.msg})"
        ) from exc
    spec = parse_config_data(data, str(path))
    logger.info("Loaded configuration %s", path)
    return spec


def dump_spec(spec: ProblemSpec) -> dict:
    return ProblemSpecSerializer(spec).data


def dump_spec_json(spec: ProblemSpec) -> str:
    return json.dumps(dump_spec(spec), indent=2)


def collect_overrides(**cli: Any) -> dict[str, Any]:
    """Merge VISCO_* settings with command-line values, the latter winning."""
    merged = {
        key: value
        for key, value in settings.VISCOWAVE.items()
        if key in OVERRIDE_KEYS and value is not None
    }
    merged.update(
        {key.upper(): value for key, value in cli.items() if value is not None}
    )
    return merged


def apply_overrides(spec: ProblemSpec, overrides: dict[str, Any]) -> ProblemSpec:
    sections: dict[str, dict[str, Any]] = {}
    top: dict[str, Any] = {}
    for key, value in overrides.items():
        if key not in OVERRIDE_KEYS:
            continue
        section, name = OVERRIDE_KEYS[key]
        if isinstance(value, Path):
            value = str(value)
        if section is None:
            top[name] = value
        else:
            sections.setdefault(section, {})[name] = value
    try:
        for section, changes in sections.items():
            top[section] = replace(getattr(spec, section), **changes)
        updated = replace(spec, **top)
    except DomainError as exc:
        raise ConfigError("invalid override", [str(exc)]) from exc
    if top:
        logger.info("Applied overrides: %s", ", ".join(sorted(overrides)))
    return updated
