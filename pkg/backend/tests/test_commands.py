import json
import math
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from simulations.exit_codes import ExitCode

from .factories import config_data

BLOWUP = {
    "material": {"m0": 1.0},
    "kernels": {},
    "coupling": {"a": 10.0, "b": 10.0, "p": 1.0},
    "initial": {
        "u0_modes": [{"index": [1], "amplitude": 5.0}],
        "v0_modes": [{"index": [1], "amplitude": 5.0}],
    },
    "numerics": {
        "dt": 1e-3,
        "t_end": 1.0,
        "memory_mode": "direct",
        "divergence_threshold": 1e6,
    },
    "certification": {"enabled": False},
}

LARGE_DATA = {
    "initial": {
        "u0_modes": [{"index": [1], "amplitude": 0.4}],
        "v0_modes": [{"index": [2], "amplitude": 0.4}],
    },
    "numerics": {"dt": 0.01, "t_end": 0.2, "memory_mode": "direct"},
}


def manage(name, *args):
    out = StringIO()
    call_command(name, *args, stdout=out)
    return out.getvalue()


def exit_code_of(name, *args):
    with pytest.raises(CommandError) as excinfo:
        manage(name, *args)
    return excinfo.value.returncode


def test_run_writes_outputs_and_succeeds(config_file, tmp_path):
    out_dir = tmp_path / "out"
    output = manage("run", "--config", str(config_file()), "--output-dir", str(out_dir))

    assert (out_dir / "series.csv").exists()
    report = json.loads((out_dir / "report.json").read_text())
    assert report["run"]["exit_code"] == 0
    assert "in_well=True" in output
    assert "run completed" in output


def test_run_without_certification_skips_report(config_file, tmp_path):
    manage(
        "run",
        "--config",
        str(config_file()),
        "--output-dir",
        str(tmp_path),
        "--no-certify",
    )

    assert (tmp_path / "series.csv").exists()
    assert not (tmp_path / "report.json").exists()


def test_run_stride_flag_overrides_file(config_file, tmp_path):
    manage(
        "run",
        "--config",
        str(config_file()),
        "--output-dir",
        str(tmp_path),
        "--stride",
        "25",
    )

    rows = (tmp_path / "series.csv").read_text().splitlines()
    # header plus levels 0, 25, 50, 75, 100
    assert len(rows) == 6


def test_run_reports_divergence(config_file, tmp_path):
    path = config_file(config_data(**BLOWUP))

    code = exit_code_of("run", "--config", str(path), "--output-dir", str(tmp_path))

    assert code == ExitCode.DIVERGED
    assert (tmp_path / "series.csv").exists()


def test_run_reports_hypothesis_failure(config_file, tmp_path):
    path = config_file(config_data(**LARGE_DATA))

    code = exit_code_of("run", "--config", str(path), "--output-dir", str(tmp_path))

    assert code == ExitCode.HYPOTHESIS_FAILURE
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["hyp_E0_below_E1"] is False


@pytest.mark.parametrize(
    "data",
    [
        config_data(material={"m0": -1.0}),
        config_data(numerics={"dt": 0.01}),
        config_data(extra=True),
        config_data(coupling={"a": 1.0, "b": 1.0, "p": -2.0}),
    ],
)
def test_invalid_config_exits_with_config_error(config_file, tmp_path, data):
    path = config_file(data)

    assert exit_code_of("run", "--config", str(path)) == ExitCode.CONFIG_ERROR


def test_malformed_json_exits_with_config_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"domain": ')

    assert exit_code_of("certify", "--config", str(path)) == ExitCode.CONFIG_ERROR


def test_missing_config_exits_with_io_error(tmp_path):
    missing = tmp_path / "nowhere.json"

    assert exit_code_of("run", "--config", str(missing)) == ExitCode.IO_ERROR


def test_cfl_violation_exits_with_numerical_failure(config_file, tmp_path):
    path = config_file(config_data(numerics={"dt": 0.1, "t_end": 1.0}))

    code = exit_code_of("run", "--config", str(path), "--output-dir", str(tmp_path))

    assert code == ExitCode.NUMERICAL_FAILURE


def test_certify_does_not_apply_the_cfl_guard(config_file):
    path = config_file(config_data(numerics={"dt": 0.1, "t_end": 1.0}))

    report = json.loads(manage("certify", "--config", str(path)))
    assert report["hyp_E0_below_E1"] is True


def test_invalid_memory_mode_override_from_environment(config_file, settings):
    settings.VISCOWAVE["MEMORY_MODE"] = "fourier"

    assert exit_code_of("run", "--config", str(config_file())) == ExitCode.CONFIG_ERROR


@pytest.mark.parametrize("command", ["run", "certify", "spec_dump"])
def test_negative_seed_flag_exits_with_config_error(config_file, command):
    args = ("--config", str(config_file()), "--seed", "-1")

    assert exit_code_of(command, *args) == ExitCode.CONFIG_ERROR


def test_negative_seed_from_environment_exits_with_config_error(config_file, settings):
    settings.VISCOWAVE["SEED"] = -1

    code = exit_code_of("certify", "--config", str(config_file()))

    assert code == ExitCode.CONFIG_ERROR


def test_certify_prints_report(config_file):
    output = manage("certify", "--config", str(config_file()))

    report = json.loads(output)
    assert report["hyp_E0_below_E1"] is True
    assert report["alpha_star"] == pytest.approx(report["eta_estimate"] ** -0.25)


def test_certify_writes_report_into_output_dir(config_file, tmp_path):
    out_dir = tmp_path / "certified"
    output = manage(
        "certify", "--config", str(config_file()), "--output-dir", str(out_dir)
    )

    assert "wrote" in output
    assert json.loads((out_dir / "report.json").read_text())["p"] == 1.0


def test_certify_flags_large_data(config_file):
    path = config_file(config_data(**LARGE_DATA))

    assert exit_code_of("certify", "--config", str(path)) == ExitCode.HYPOTHESIS_FAILURE


def test_spec_dump_applies_overrides(config_file):
    output = manage(
        "spec_dump", "--config", str(config_file()), "--seed", "7", "--memory-mode", "prony"
    )

    dumped = json.loads(output)
    assert dumped["seed"] == 7
    assert dumped["numerics"]["memory_mode"] == "prony"
    assert dumped["domain"]["n_cells"] == [49]


def test_convergence_writes_results(mocker, tmp_path):
    results = {
        "temporal": {
            "dt": [4e-3, 2e-3],
            "error": [4e-6, 1e-6],
            "order": [2.0],
        },
        "memory": {
            "dt": [4e-3, 2e-3],
            "difference": [0.0, 0.0],
            "order": [math.nan],
        },
    }
    runner = mocker.patch(
        "simulations.management.commands.convergence.run_studies",
        return_value=results,
    )

    output = manage("convergence", "--output-dir", str(tmp_path))

    runner.assert_called_once_with(("temporal", "spatial", "memory"))
    assert "temporal" in output
    written = json.loads((tmp_path / "convergence.json").read_text())
    assert written["temporal"]["order"] == [2.0]
    assert written["memory"]["order"] == [None]


def test_convergence_runs_a_single_study(mocker, tmp_path):
    runner = mocker.patch(
        "simulations.management.commands.convergence.run_studies",
        return_value={"spatial": {"n_cells": [49], "h": [0.06], "error": [1e-3], "order": []}},
    )

    manage("convergence", "--study", "spatial", "--output-dir", str(tmp_path))

    runner.assert_called_once_with(("spatial",))
