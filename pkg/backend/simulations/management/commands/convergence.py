import json
import math
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from simulations.exit_codes import ExitCode
from simulations.studies import STUDIES, run_studies


def _format(value):
    return "-" if value is None or math.isnan(value) else f"{value:.4g}"


class Command(BaseCommand):
    help = "Run the temporal, spatial and memory refinement studies."

    def add_arguments(self, parser):
        parser.add_argument(
            "--study", choices=(*STUDIES, "all"), default="all", help="Study to run"
        )
        parser.add_argument("--output-dir", type=Path, default=Path("."))

    def handle(self, *args, **options):
        names = STUDIES if options["study"] == "all" else (options["study"],)
        results = run_studies(names)

        for name, study in results.items():
            self.stdout.write(self.style.MIGRATE_HEADING(name))
            errors = study.get("error", study.get("difference"))
            orders = [None, *study["order"]]
            levels = study.get("dt", study.get("n_cells"))
            for level, error, order in zip(levels, errors, orders):
                self.stdout.write(f"  {level:>10}  {_format(error):>12}  {_format(order):>8}")

        path = options["output_dir"] / "convergence.json"
        try:
            options["output_dir"].mkdir(parents=True, exist_ok=True)
            cleaned = json.loads(json.dumps(results), parse_constant=lambda _: None)
            path.write_text(json.dumps(cleaned, indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise CommandError(str(exc), returncode=ExitCode.IO_ERROR) from exc
        self.stdout.write(f"wrote {path}")
