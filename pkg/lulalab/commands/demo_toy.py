# Python stdlib
import os.path

# Third-party
import numpy as np
import pandas as pd
from lxml import etree  # http://lxml.de/

# Internal
from .base import BaseCommand, CommandError, prepare_data, build_network, resolve_posterior, training_outliers, write_frame
from .. import laplace, lula, metrics
from ..log import default_logger as logger
from ..numerics import Rng
from ..training import LossKind, train_map
from ..utils import ensure_path
from ..utils.xmlhelper import XMLHelper

STAGES = ('map', 'laplace', 'lula')
TASKS = (('regression', 'toy_regression'), ('classification', 'two_moons'))
DEMO_UNITS = 50
LATTICE_HALF_WIDTH = 6.0


def far_ring(m, radii, rng):
    """m points with radius uniform in radii and a uniform angle."""
    radius = rng.uniform(radii[0], radii[1], m)
    angle = rng.uniform(0.0, 2.0 * np.pi, m)
    return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)


class Stage(object):
    """A network with the posterior used for its predictive (None for the MAP stage)."""

    def __init__(self, name, net, post, loss):
        self.name = name
        self.net = net
        self.post = post
        self.loss = loss

    def predict(self, x, cfg):
        if self.post is None:
            return laplace.map_predict(self.net, self.loss, x)
        return laplace.predict(self.net, self.post, x, cfg)


def run_stages(config, splits, loss):
    """MAP training, its Laplace posterior, then LULA units trained on top of it."""
    net = build_network(config, splits, loss)
    net, _ = train_map(net, splits.train, loss, config.train_config())
    post, _ = resolve_posterior(config, net, splits, loss)

    section, cfg = config['lula'], config.lula_config()
    units = DEMO_UNITS if section['units'] is None else section['units']
    augmented, aug = lula.augment(net, lula.penultimate_counts(net, units), Rng(cfg.seed).derive('units', units), section['init_std'])
    out_data = training_outliers(config, splits.val)
    trained, _, _ = lula.train_lula(augmented, aug, splits.val, out_data, loss, post.prior_precision, cfg, fit_data=splits.train)

    laplace_section = config['laplace']
    curvature = laplace.fit_curvature(trained, splits.train, loss, laplace_section['curvature'], laplace_section['subset'])
    lula_post = laplace.build_posterior(curvature, laplace.subset_mean(trained, laplace_section['subset']), post.prior_precision, laplace_section['damping'])
    return [Stage('map', net, None, loss), Stage('laplace', net, post, loss), Stage('lula', trained, lula_post, loss)]


def regression_grid(config, stage, cfg):
    low, high = config['data']['x_range']
    width = high - low
    x = np.linspace(low - width / 2.0, high + width / 2.0, config['eval']['grid_size'] * 4)[:, None]
    prediction = stage.predict(x, cfg)
    std = np.sqrt(prediction.variance(config['eval']['include_aleatoric']))
    return pd.DataFrame({'x': x[:, 0], 'mean': prediction.mean[:, 0], 'std': std[:, 0]})


def classification_grid(config, stage, cfg):
    axis = np.linspace(-LATTICE_HALF_WIDTH, LATTICE_HALF_WIDTH, config['eval']['grid_size'])
    x1, x2 = np.meshgrid(axis, axis, indexing='ij')
    x = np.stack([x1.ravel(), x2.ravel()], axis=1)
    probabilities = stage.predict(x, cfg)
    return pd.DataFrame({'x1': x[:, 0], 'x2': x[:, 1], 'confidence': probabilities.max(axis=1), 'p1': probabilities[:, 1]})


def stage_summary(config, task, stage, splits, far, cfg):
    """Mean confidence (classification) or mean predictive std (regression) near and far from the data."""
    if task == 'classification':
        return {
            'test_confidence': metrics.mmc(stage.predict(splits.test.features, cfg)),
            'far_confidence': metrics.mmc(stage.predict(far, cfg)),
        }
    aleatoric = config['eval']['include_aleatoric']
    return {
        'test_std': metrics.mean_predictive_std(stage.predict(splits.test.features, cfg).variance(aleatoric)),
        'far_std': metrics.mean_predictive_std(stage.predict(far, cfg).variance(aleatoric)),
    }


class Command(BaseCommand):
    """Runs MAP, Laplace and LULA on the two toy problems and writes plot-ready grids."""
    help = 'Toy demo: writes <task>_<stage>.csv grids and summary.xml into the --out directory.'

    def handle(self, config, options):
        if not options.out:
            raise CommandError('demo-toy needs --out, the output directory.')

        cfg = config.predict_config(0)
        rng = Rng(config.section_seed('eval')).derive('far_field')
        root = etree.Element('demo_summary', seed=str(config.seed))
        written = []
        for task, generator in TASKS:
            splits = prepare_data(config, generator)
            loss = LossKind.gaussian(config['model']['noise_precision']) if task == 'regression' else LossKind.categorical()
            if task == 'classification':
                far = far_ring(len(splits.test), config['eval']['far_radius'], rng.derive(task))
            else:
                low, high = config['lula']['ood_range']
                far = rng.derive(task).uniform(low, high, (len(splits.test), 1))

            task_elem = XMLHelper.sub(root, 'task', name=task, dataset=generator)
            for stage in run_stages(config, splits, loss):
                grid = regression_grid(config, stage, cfg) if task == 'regression' else classification_grid(config, stage, cfg)
                path = os.path.join(options.out, '%s_%s.csv' % (task, stage.name))
                write_frame(grid, path)
                written.append(path)
                values = stage_summary(config, task, stage, splits, far, cfg)
                XMLHelper.sub(task_elem, 'stage', name=stage.name, **dict((k, '%.17g' % v) for k, v in values.items()))

        summary_path = os.path.join(options.out, 'summary.xml')
        ensure_path(summary_path)
        XMLHelper.write(root, summary_path)
        logger.info('demo-toy command => %s grids and %s [OK]' % (len(written), summary_path))
        self.stdout.write('%s grid files and the summary written to %s.\n' % (len(written), options.out))
