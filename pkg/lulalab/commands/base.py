# Python stdlib
import os.path
import sys

# Third-party
import numpy as np

# Internal
from .. import data as datasets
from .. import laplace, lula
from ..config import load_config
from ..log import default_logger as logger
from ..network import ModelFormatError, load
from ..numerics import NotPositiveDefinite, Rng
from ..training import TrainingDiverged, init_network
from ..utils import ImproperlyConfigured, ensure_path, stem_path
from ..utils.serializers import SerializationFailed, DeserializationFailed

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2

RUNTIME_ERRORS = (
    NotPositiveDefinite,
    TrainingDiverged,
    laplace.CurvatureCapExceeded,
    laplace.TuningFailed,
    lula.LulaTrainingFailed,
    datasets.DataFormatError,
    ModelFormatError,
    SerializationFailed,
    DeserializationFailed,
    ValueError,
    OSError,
)


class CommandError(Exception):
    pass


class BaseCommand(object):
    """A lula-lab command.

    Subclasses set help, declare their options in add_arguments and implement
    handle(config, options). Errors are reported on stderr and mapped to exit codes:
    2 for configuration errors, 1 for any other failure.
    """
    help = ''
    requires_model = False

    def __init__(self, stdout=None, stderr=None):
        self.stdout = stdout or sys.stdout
        self.stderr = stderr or sys.stderr

    def add_arguments(self, parser):
        parser.add_argument('--config', help='experiment configuration (XML); defaults are used when omitted')
        parser.add_argument('--model', required=self.requires_model, help='model file')
        parser.add_argument('--out', help='output path')
        parser.add_argument('--seed', type=int, help='overrides the experiment seed (64-bit unsigned)')

    def load_config(self, options):
        return load_config(options.config, options.seed)

    def handle(self, config, options):
        raise NotImplementedError

    def execute(self, options):
        """Runs the command and returns its exit code."""
        try:
            config = self.load_config(options)
            self.handle(config, options)
        except ImproperlyConfigured as err:
            self.stderr.write('Configuration error: %s\n' % (err,))
            logger.error('%s => configuration error: %s [KO]' % (self.__class__.__module__, err))
            return EXIT_CONFIG_ERROR
        except RUNTIME_ERRORS + (CommandError,) as err:
            self.stderr.write('Error: %s\n' % (err,))
            logger.error('%s => %s: %s [KO]' % (self.__class__.__module__, err.__class__.__name__, err))
            return EXIT_FAILURE
        return EXIT_OK


class Splits(object):
    """Train, validation and test sets of one experiment."""

    def __init__(self, train, val, test):
        self.train = train
        self.val = val
        self.test = test

    @property
    def task(self):
        return self.train.task


def generate_dataset(config, generator=None):
    """The full dataset described by the data section (before splitting)."""
    section = config['data']
    generator = generator or section['generator']
    seed = Rng(config.section_seed('data')).derive('generator').seed
    if generator == 'two_moons':
        return datasets.gen_two_moons(section['n_samples'], section['noise_std'], seed)
    if generator == 'toy_regression':
        return datasets.gen_toy_regression(section['n_samples'], tuple(section['x_range']), section['noise_std'], seed)
    target = section['target_column']
    if not section['header']:
        try:
            target = int(target)
        except ValueError:
            raise ImproperlyConfigured('data.target_column must be an index when the CSV has no header.')
    return datasets.load_csv(section['csv_path'], target, header=section['header'], task=section['task'])


def prepare_data(config, generator=None):
    """Generates or loads the dataset, splits it and standardizes it when configured."""
    full = generate_dataset(config, generator)
    train, val, test = datasets.split(full, config.split_spec())
    if config['data']['standardize']:
        train, (val, test), _ = datasets.standardize(train, (val, test), targets=config['data']['standardize_targets'])
    return Splits(train, val, test)


def output_dim(splits, loss):
    if loss.name == 'gaussian':
        return splits.train.targets.shape[1]
    if loss.name == 'binary':
        return 1
    labels = np.concatenate([splits.train.targets, splits.val.targets, splits.test.targets])
    return max(2, int(labels.max()) + 1)


def build_network(config, splits, loss):
    """A freshly initialized network for the model section."""
    model = config['model']
    dims = (splits.train.n_features,) + tuple(model['hidden_dims']) + (output_dim(splits, loss),)
    return init_network(dims, model['activations'], Rng(config.section_seed('model')))


def load_model(path):
    """Loads a model and, when present, the augmentation file written next to it."""
    if not os.path.isfile(path):
        raise CommandError('The model file %s does not exist.' % (path,))
    net = load(path)
    aug_path = stem_path(path, '.aug.xml')
    aug = lula.load_augmentation(aug_path) if os.path.isfile(aug_path) else None
    return net, aug


def ood_set(config, in_data, kind, rng):
    """An outlier set for in_data; uniform and asymptotic are noise sets, the other kinds transform in_data."""
    m, n = len(in_data), in_data.n_features
    seed = rng.integers(2 ** 63)
    if kind == 'uniform':
        low, high = config['lula']['ood_range']
        return datasets.gen_uniform_noise(m, n, low, high, seed)
    if kind == 'asymptotic':
        return datasets.gen_uniform_noise(m, n, 0.0, 1.0, seed, scale=5000.0)
    return datasets.synthesize_ood(in_data, kind, rng, config.ood_params())


def resolve_ood_kind(config, section, in_data):
    """The outlier kind of section.ood_kind; auto means uniform noise for regression and inputs with fewer than 3 features, mixed otherwise."""
    kind = config[section]['ood_kind']
    if kind == 'auto':
        kind = 'uniform' if in_data.task == 'regression' or in_data.n_features < 3 else 'mixed'
    if kind not in datasets.OOD_KINDS + ('uniform',):
        raise ImproperlyConfigured('Unknown outlier kind %r in %s.ood_kind.' % (kind, section))
    return kind


def training_outliers(config, in_data):
    """Outliers of the LULA objective."""
    kind = resolve_ood_kind(config, 'lula', in_data)
    return ood_set(config, in_data, kind, Rng(config.section_seed('lula')).derive('outliers'))


def evaluation_outliers(config, in_data):
    """The outlier sets of the eval section; blur is skipped for fewer than 3 features."""
    rng = Rng(config.section_seed('eval')).derive('outliers')
    outliers = []
    for kind in config['eval']['ood_kinds']:
        if kind == 'blur' and in_data.n_features < 3:
            logger.warning('%s - Outliers => blur needs 3 features, skipped' % (in_data.log_desc,))
            continue
        if kind not in datasets.OOD_KINDS + ('uniform', 'asymptotic'):
            raise ImproperlyConfigured('Unknown outlier kind %r in eval.ood_kinds.' % (kind,))
        outlier = ood_set(config, in_data, kind, rng.derive(kind))
        outliers.append(datasets.Dataset(outlier.features, role='out', name=kind))
    return outliers


def resolve_posterior(config, net, splits, loss):
    """Fits the configured Laplace posterior of net, tuning the prior precision when configured.

    Returns:
        A (LaplacePosterior, TuningResult or None) pair.
    """
    section = config['laplace']
    curvature = laplace.fit_curvature(net, splits.train, loss, section['curvature'], section['subset'])
    tuning = None
    prior_precision = section['prior_precision']
    if section['tuning'] != 'none':
        out_data = None
        if section['tuning'] == 'ood_mmc':
            kind = resolve_ood_kind(config, 'laplace', splits.val)
            out_data = ood_set(config, splits.val, kind, Rng(config.section_seed('laplace')).derive('outliers'))
        tuning = laplace.tune_prior_precision(
            net, curvature, splits.val, section['tuning'], section['prior_grid'],
            config.tuning_predict_config(), out_data, section['damping'],
        )
        prior_precision = tuning.prior_precision
    post = laplace.build_posterior(curvature, laplace.subset_mean(net, section['subset']), prior_precision, section['damping'])
    return post, tuning


def write_frame(frame, path):
    ensure_path(path)
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
