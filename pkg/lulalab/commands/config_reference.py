# Internal
from .base import BaseCommand, CommandError
from ..config import ExperimentConfig
from ..utils import ensure_path


class Command(BaseCommand):
    """Writes the configuration reference: every section and key with its default."""
    help = 'Write the fully-defaulted configuration reference file.'

    def load_config(self, options):
        return ExperimentConfig(seed=options.seed or 0)

    def handle(self, config, options):
        if not options.out:
            raise CommandError('config-reference needs --out.')
        ensure_path(options.out)
        config.write(options.out)
        self.stdout.write('Configuration reference written to %s.\n' % (options.out,))
