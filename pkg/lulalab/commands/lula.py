# Third-party
import numpy as np
import pandas as pd

# Internal
from .base import BaseCommand, CommandError, prepare_data, load_model, resolve_posterior, training_outliers, write_frame
from .. import lula
from ..log import default_logger as logger
from ..network import forward, save
from ..numerics import Rng
from ..utils import ImproperlyConfigured, ensure_path, stem_path

PRESERVATION_POINTS = 100
PRESERVATION_TOLERANCE = 1e-12


def check_predictions_preserved(original, augmented, rng, points=PRESERVATION_POINTS, scale=5.0):
    """Largest relative output difference between the two networks on random inputs.

    Raises:
        A LulaTrainingFailed exception when it exceeds 1e-12.
    """
    x = scale * rng.standard_normal((points, original.input_dim))
    expected = forward(original, x).output
    actual = forward(augmented, x).output
    error = float(np.max(np.abs(actual - expected) / np.maximum(1.0, np.abs(expected))))
    if error > PRESERVATION_TOLERANCE:
        raise lula.LulaTrainingFailed('%s changes the predictions of %s (relative error %.3g) [KO]' % (augmented.log_desc, original.log_desc, error))
    return error


class Command(BaseCommand):
    """Adds LULA units to a MAP model and trains them."""
    help = 'Augment and train LULA units; writes the model, <out>.aug.xml and <out>.history.csv.'
    requires_model = True

    def handle(self, config, options):
        if not options.out:
            raise CommandError('lula needs --out, the path of the augmented model to write.')
        net, aug = load_model(options.model)
        if aug is not None:
            raise CommandError('%s already holds LULA units.' % (options.model,))

        section = config['lula']
        splits = prepare_data(config)
        loss = config.loss_kind()
        cfg = config.lula_config()
        map_post, _ = resolve_posterior(config, net, splits, loss)
        prior_precision = map_post.prior_precision
        out_data = training_outliers(config, splits.val)

        units_frame = None
        if section['units'] is not None:
            rng = Rng(cfg.seed).derive('units', section['units'])
            augmented, aug = lula.augment(net, lula.penultimate_counts(net, section['units']), rng, section['init_std'])
            trained, history, _ = lula.train_lula(augmented, aug, splits.val, out_data, loss, prior_precision, cfg, fit_data=splits.train)
        elif loss.is_classification:
            result = lula.grid_search_units(
                net, section['unit_grid'], splits.val, out_data, loss, prior_precision, cfg,
                fit_data=splits.train, init_std=section['init_std'],
            )
            trained, aug, history = result.net, result.augmentation, result.history
            units_frame = pd.DataFrame(result.as_rows(), columns=['units', 'score'])
        else:
            raise ImproperlyConfigured('lula.units is required for regression (the unit grid search scores confidences).')

        error = check_predictions_preserved(net, trained, Rng(cfg.seed).derive('preservation'))

        ensure_path(options.out)
        save(trained, options.out)
        lula.save_augmentation(aug, stem_path(options.out, '.aug.xml'))
        write_frame(pd.DataFrame({'epoch': range(1, len(history) + 1), 'objective': history}), stem_path(options.out, '.history.csv'))
        if units_frame is not None:
            write_frame(units_frame, stem_path(options.out, '.units.csv'))

        logger.info('%s - lula command %s => %s [OK]' % (net.log_desc, aug.log_desc, options.out))
        self.stdout.write('Prediction check passed on %s random inputs (max relative difference %.3g).\n' % (PRESERVATION_POINTS, error))
        self.stdout.write('Augmented model %s written to %s.\n' % (aug.log_desc, options.out))
