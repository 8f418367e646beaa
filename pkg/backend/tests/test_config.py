import json
import math

import pytest

from simulations.config import (
    apply_overrides,
    collect_overrides,
    dump_spec,
    dump_spec_json,
    flatten_errors,
    parse_config,
    parse_config_data,
)
from simulations.specs import Mode
from viscowave.exceptions import ConfigError

from .factories import config_data


def errors_of(data):
    with pytest.raises(ConfigError) as excinfo:
        parse_config_data(data, "test.json")
    return excinfo.value.errors


def test_parse_builds_the_problem(config_file):
    spec = parse_config(config_file())
    assert spec.domain.n_cells == (49,)
    assert spec.domain.lengths == (math.pi,)
    assert spec.coupling.n == 1
    assert spec.kernels.g1.terms[0].a == 0.25
    assert spec.initial.v0_modes == (Mode((2,), 0.05),)
    assert spec.numerics.memory_mode == "direct"
    assert spec.certification.eta_budget == 16


def test_missing_sections_take_defaults():
    data = config_data()
    for section in ("kernels", "coupling", "initial", "certification"):
        data.pop(section)
    spec = parse_config_data(data)
    assert spec.kernels.is_zero
    assert (spec.coupling.a, spec.coupling.b, spec.coupling.p) == (1.0, 1.0, 1.0)
    assert spec.initial.u0_modes == ()
    assert spec.outputs.series_path == "series.csv"
    assert spec.outputs.stride == 1
    assert spec.certification.eta_budget == 64
    assert spec.numerics.linear_solver == "auto"
    assert spec.seed == 0


def test_dump_parses_back_to_the_same_problem(config_file):
    spec = parse_config(config_file())
    dumped = dump_spec(spec)
    assert dumped["numerics"]["cg_tolerance"] == 1e-10
    assert dumped["outputs"]["metrics_path"] is None
    assert parse_config_data(json.loads(dump_spec_json(spec))) == spec


def test_malformed_json_reports_the_position(config_file, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "domain": ,\n}')
    with pytest.raises(ConfigError, match=r"broken.json:2:13"):
        parse_config(path)


def test_unreadable_file_raises_os_error(tmp_path):
    with pytest.raises(OSError):
        parse_config(tmp_path / "missing.json")


def test_top_level_must_be_an_object():
    with pytest.raises(ConfigError, match="JSON object"):
        parse_config_data([1, 2, 3])


def test_unknown_keys_are_rejected():
    data = config_data(colour="red")
    data["numerics"]["timestep"] = 0.1
    errors = errors_of(data)
    assert "colour: unknown key" in errors


def test_unknown_nested_key_is_reported_with_its_path():
    data = config_data()
    data["numerics"]["timestep"] = 0.1
    assert errors_of(data) == ["numerics.timestep: unknown key"]


@pytest.mark.parametrize(
    "section,changes,path",
    [
        ("material", {"m0": 0.0}, "material.m0"),
        ("material", {"m0": 1.0, "gamma": 0.5}, "material.gamma"),
        ("coupling", {"p": -1.5}, "coupling.p"),
        ("numerics", {"dt": 0.1, "t_end": 0.05}, "numerics"),
        ("numerics", {"dt": 0.01, "t_end": 1.0, "cg_tolerance": 0.01}, "numerics"),
        ("numerics", {"dt": 0.01, "t_end": 1.0, "memory_mode": "fft"}, "numerics.memory_mode"),
        ("domain", {"dim": 1, "lengths": [1.0], "n_cells": [1]}, "domain"),
    ],
)
def test_field_errors_carry_their_path(section, changes, path):
    data = config_data()
    data[section] = changes
    errors = errors_of(data)
    assert any(error.startswith(f"{path}:") for error in errors), errors


def test_kernel_terms_are_validated_per_entry():
    data = config_data(kernels={"g1": [{"a": 0.1, "b": 1.0}, {"a": 0.1, "b": -2.0}]})
    assert errors_of(data) == ["kernels.g1[1].b: kernel rates must be positive"]


def test_heavy_kernel_is_rejected():
    data = config_data(kernels={"g1": [{"a": 2.0, "b": 1.0}]})
    [error] = errors_of(data)
    assert error.startswith("kernels: kernel mass exceeds base stiffness")


def test_mode_indices_must_match_dimension():
    data = config_data()
    data["initial"]["u0_modes"] = [{"index": [1, 1], "amplitude": 1.0}]
    assert errors_of(data) == ["initial.u0_modes: mode 0 needs 1 indices, one per axis"]


def test_flatten_errors_handles_nesting():
    errors = {"a": {"b": [{}, {"c": ["bad"]}]}, "non_field_errors": ["top"]}
    assert flatten_errors(errors) == ["a.b[1].c: bad", "<root>: top"]


def test_command_line_beats_environment_beats_file(settings, config_file):
    spec = parse_config(config_file())
    settings.VISCOWAVE = {**settings.VISCOWAVE, "MEMORY_MODE": "prony", "STRIDE": 5}

    from_env = apply_overrides(spec, collect_overrides(stride=None))
    assert from_env.numerics.memory_mode == "prony"
    assert from_env.outputs.stride == 5

    from_cli = apply_overrides(spec, collect_overrides(stride=7, seed=3))
    assert from_cli.outputs.stride == 7
    assert from_cli.seed == 3
    assert from_cli.numerics.memory_mode == "prony"


def test_without_overrides_the_file_wins(config_file):
    spec = parse_config(config_file())
    assert apply_overrides(spec, collect_overrides()) == spec


def test_invalid_override_is_a_config_error(config_file):
    spec = parse_config(config_file())
    with pytest.raises(ConfigError, match="invalid override"):
        apply_overrides(spec, {"STRIDE": 0})
    with pytest.raises(ConfigError):
        apply_overrides(spec, {"MEMORY_MODE": "fft"})


def test_negative_seed_override_is_a_config_error(config_file):
    spec = parse_config(config_file())
    with pytest.raises(ConfigError, match="invalid override") as excinfo:
        apply_overrides(spec, {"SEED": -1})
    assert "seed must be nonnegative" in excinfo.value.errors[0]


def test_paths_from_settings_become_strings(settings, config_file, tmp_path):
    settings.VISCOWAVE = {**settings.VISCOWAVE, "METRICS_TEXTFILE": tmp_path / "m.prom"}
    spec = apply_overrides(parse_config(config_file()), collect_overrides())
    assert spec.outputs.metrics_path == str(tmp_path / "m.prom")
