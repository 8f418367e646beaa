from simulations.config import dump_spec_json

from ._base import SimulationCommand


class Command(SimulationCommand):
    help = "Print the validated configuration with every default filled in."

    def handle(self, *args, **options):
        spec = self.load_spec(options)
        self.stdout.write(dump_spec_json(spec))
