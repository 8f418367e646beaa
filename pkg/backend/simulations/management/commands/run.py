from django.core.management.base import CommandError

from simulations.exit_codes import ExitCode, outcome_code
from simulations.pipeline import run_pipeline, write_outputs

from ._base import SimulationCommand


class Command(SimulationCommand):
    help = "Simulate a configuration, record the energy series and certify it."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--no-certify",
            action="store_true",
            help="Skip the certification report",
        )

    def handle(self, *args, **options):
        spec = self.load_spec(options)
        with self.exit_codes():
            result = run_pipeline(spec, certify=False if options["no_certify"] else None)
            paths = write_outputs(result, spec, options["output_dir"])

        for path in paths:
            self.stdout.write(f"wrote {path}")
        report = result.report
        if report is not None:
            self.stdout.write(
                f"eta={report.eta_estimate:.6g} alpha*={report.alpha_star:.6g} "
                f"E1={report.E1:.6g} lambda={report.lambda_value:.6g} "
                f"in_well={report.trajectory_in_well} "
                f"bound_satisfied={report.bound_satisfied}"
            )

        code = outcome_code(result)
        if code is ExitCode.DIVERGED:
            raise CommandError(
                f"run diverged at t={result.diverged_at:g}", returncode=code
            )
        if code is not ExitCode.OK:
            raise CommandError(
                "stable-set hypotheses failed or were contradicted; see the report",
                returncode=code,
            )
        self.stdout.write(self.style.SUCCESS("run completed"))
