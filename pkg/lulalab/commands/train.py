# Third-party
import pandas as pd

# Internal
from .base import BaseCommand, CommandError, prepare_data, build_network, write_frame
from ..log import default_logger as logger
from ..network import save
from ..training import train_map
from ..utils import ensure_path, stem_path


class Command(BaseCommand):
    """Trains the MAP network of an experiment."""
    help = 'Train the MAP network; writes the model file and <out>.history.csv.'

    def handle(self, config, options):
        if not options.out:
            raise CommandError('train needs --out, the path of the model file to write.')

        splits = prepare_data(config)
        loss = config.loss_kind()
        net = build_network(config, splits, loss)
        net, history = train_map(net, splits.train, loss, config.train_config())

        ensure_path(options.out)
        save(net, options.out)
        history_path = stem_path(options.out, '.history.csv')
        write_frame(pd.DataFrame({'epoch': range(1, len(history) + 1), 'objective': history}), history_path)

        logger.info('%s - train command => %s, %s [OK]' % (net.log_desc, options.out, history_path))
        self.stdout.write('Model written to %s (%s epochs, final objective %s).\n' % (options.out, len(history), history[-1] if history else 'n/a'))
