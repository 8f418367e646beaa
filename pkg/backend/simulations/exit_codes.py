"""Stable process exit codes of the management commands."""

from enum import IntEnum


class ExitCode(IntEnum):
    OK = 0
    CONFIG_ERROR = 2
    DIVERGED = 3
    HYPOTHESIS_FAILURE = 4
    IO_ERROR = 5
    NUMERICAL_FAILURE = 6


def outcome_code(result) -> ExitCode:
    """Exit code of a finished pipeline run.

    Divergence wins over everything else. A hypothesis failure means the
    stable-set hypotheses do not hold for the initial data, or that the run
    contradicted a conclusion they imply (the trajectory left the well or the
    energy exceeded the exponential bound). A non-positive lambda and a bound
    violation without memory kernels are only reported.
    """
    if result.diverged:
        return ExitCode.DIVERGED
    report = result.report
    if report is None:
        return ExitCode.OK
    if not (report.hyp_E0_below_E1 and report.hyp_initial_in_well):
        return ExitCode.HYPOTHESIS_FAILURE
    if report.trajectory_in_well is False:
        return ExitCode.HYPOTHESIS_FAILURE
    if report.bound_satisfied is False and report.decay_theorem_applicable:
        return ExitCode.HYPOTHESIS_FAILURE
    return ExitCode.OK
