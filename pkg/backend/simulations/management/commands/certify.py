import json
from pathlib import Path

from django.core.management.base import CommandError

from certify.services import report_to_dict
from simulations.exit_codes import ExitCode
from simulations.pipeline import certify_only

from ._base import SimulationCommand


class Command(SimulationCommand):
    help = "Compute the certification constants and check the initial data only."

    def handle(self, *args, **options):
        spec = self.load_spec(options)
        with self.exit_codes():
            report = certify_only(spec)
            document = json.dumps(report_to_dict(report), indent=2, allow_nan=False)
            output_dir = options["output_dir"]
            if output_dir is not None:
                output_dir.mkdir(parents=True, exist_ok=True)
                path = output_dir / Path(spec.outputs.report_path).name
                path.write_text(document + "\n", encoding="utf-8")
                self.stdout.write(f"wrote {path}")
            else:
                self.stdout.write(document)

        if not (report.hyp_E0_below_E1 and report.hyp_initial_in_well):
            raise CommandError(
                "initial data lie outside the stable set",
                returncode=ExitCode.HYPOTHESIS_FAILURE,
            )
