import argparse

from django.core.management.base import BaseCommand, CommandError

from conelab.cli import SUBCOMMANDS, run


class Command(BaseCommand):
    help = "Cone differential operator toolkit: " + ", ".join(SUBCOMMANDS)

    def create_parser(self, prog_name, subcommand, **kwargs):
        # --n, --p and --t must not resolve to --no-color, --pythonpath and --traceback
        return super().create_parser(prog_name, subcommand, allow_abbrev=False, **kwargs)

    def add_arguments(self, parser):
        parser.add_argument("subcommand", help="one of: " + ", ".join(SUBCOMMANDS))
        parser.add_argument("args", nargs=argparse.REMAINDER, help="flags of the subcommand")

    def handle(self, *args, **options):
        code = run(options["subcommand"], list(args), stdout=self.stdout)
        if code:
            raise CommandError(f"conelab {options['subcommand']} exited with status {code}", returncode=code)
