"""Experiment configuration: an XML document with one element per section and key.

    <experiment seed="0">
        <data>
            <generator>two_moons</generator>
            ...
        </data>
        <model>...</model>
        <train>...</train>
        <laplace>...</laplace>
        <lula>...</lula>
        <eval>...</eval>
    </experiment>

Every key is optional and defaults to the value written by ``lula-lab config-reference``.
An empty element means "unset" for the keys that accept it. Section seeds default to
seeds derived from the experiment seed.
"""
# Python stdlib
from collections import OrderedDict

# Third-party
import numpy as np
from lxml import etree  # http://lxml.de/

# Internal
from .data import SplitSpec, OodParams
from .laplace import PredictConfig, DEFAULT_PRIOR_GRID
from .lula import LulaTrainConfig, DEFAULT_UNIT_GRID
from .numerics import Rng
from .training import TrainConfig, LossKind
from .utils import ImproperlyConfigured
from .utils.xmlhelper import XMLHelper

SECTIONS = ('data', 'model', 'train', 'laplace', 'lula', 'eval')


class ConfigError(ImproperlyConfigured):
    pass


class Key(object):
    """A configuration key: its parser, default value and description."""

    def __init__(self, kind, default, help, optional=False):
        self.kind = kind
        self.default = default
        self.help = help
        self.optional = optional

    def parse(self, name, text):
        text = (text or '').strip()
        if not text:
            if self.optional:
                return None
            raise ConfigError('The key %s cannot be empty.' % (name,))
        try:
            if self.kind == 'int':
                return int(text)
            if self.kind == 'float':
                return float(text)
            if self.kind == 'bool':
                if text.lower() not in ('true', 'false', '1', '0', 'yes', 'no'):
                    raise ValueError(text)
                return text.lower() in ('true', '1', 'yes')
            if self.kind == 'ints':
                return tuple(int(v) for v in text.split())
            if self.kind == 'floats':
                return tuple(float(v) for v in text.split())
            if self.kind == 'strs':
                return tuple(text.split())
            return text
        except ValueError:
            raise ConfigError('Invalid value %r for the key %s (%s expected).' % (text, name, self.kind))

    def format(self, value):
        if value is None:
            return ''
        if self.kind == 'bool':
            return 'true' if value else 'false'
        if self.kind == 'floats':
            return ' '.join('%.10g' % v for v in value)
        if self.kind in ('ints', 'strs'):
            return ' '.join(str(v) for v in value)
        if self.kind == 'float':
            return '%.10g' % value
        return str(value)


SCHEMA = OrderedDict([
    ('data', OrderedDict([
        ('generator', Key('str', 'two_moons', 'two_moons, toy_regression or csv')),
        ('n_samples', Key('int', 500, 'number of generated points')),
        ('noise_std', Key('float', 0.1, 'observation noise of the generators')),
        ('x_range', Key('floats', (-4.0, 4.0), 'input range of toy_regression')),
        ('csv_path', Key('str', None, 'CSV file (generator=csv)', optional=True)),
        ('target_column', Key('str', None, 'target column name, or 0-based index without header', optional=True)),
        ('header', Key('bool', True, 'whether the CSV has a header row')),
        ('task', Key('str', 'classification', 'regression or classification (generator=csv)')),
        ('split', Key('floats', (0.6, 0.2, 0.2), 'train, validation and test fractions')),
        ('standardize', Key('bool', False, 'standardize features with the training statistics')),
        ('standardize_targets', Key('bool', False, 'standardize regression targets too')),
        ('seed', Key('int', None, 'data seed (derived from the experiment seed when empty)', optional=True)),
    ])),
    ('model', OrderedDict([
        ('hidden_dims', Key('ints', (64, 64), 'hidden layer widths')),
        ('activations', Key('strs', ('relu', 'relu'), 'hidden layer activations (relu, selu, tanh, identity)')),
        ('loss', Key('str', 'auto', 'auto, gaussian, categorical or binary')),
        ('noise_precision', Key('float', 1.0, 'beta of the Gaussian likelihood')),
        ('seed', Key('int', None, 'initialization seed', optional=True)),
    ])),
    ('train', OrderedDict([
        ('optimizer', Key('str', 'adam', 'sgd or adam')),
        ('momentum', Key('float', 0.9, 'sgd momentum')),
        ('learning_rate', Key('float', 1e-3, 'step size')),
        ('epochs', Key('int', 100, 'number of epochs')),
        ('batch_size', Key('int', 32, 'minibatch size')),
        ('weight_decay', Key('float', 5e-4, 'prior precision of the MAP objective')),
        ('seed', Key('int', None, 'shuffling seed', optional=True)),
    ])),
    ('laplace', OrderedDict([
        ('curvature', Key('str', 'kfac_last_layer', 'full_ggn, diag_ggn or kfac_last_layer')),
        ('subset', Key('str', 'last_layer', 'all_layers or last_layer')),
        ('damping', Key('str', 'exact', 'Kronecker damping: exact or factor')),
        ('prior_precision', Key('float', 1.0, 'lambda used when tuning is none')),
        ('tuning', Key('str', 'val_log_likelihood', 'none, val_log_likelihood or ood_mmc')),
        ('prior_grid', Key('floats', DEFAULT_PRIOR_GRID, 'candidate prior precisions')),
        ('ood_kind', Key('str', 'auto', 'outliers of the ood_mmc objective: auto, permute, blur, contrast, mixed or uniform')),
        ('method', Key('str', 'mc', 'predictive used for tuning: mc or probit_linearized')),
        ('samples', Key('int', 100, 'MC samples used for tuning')),
        ('seed', Key('int', None, 'tuning seed', optional=True)),
    ])),
    ('lula', OrderedDict([
        ('units', Key('int', None, 'LULA units of the last hidden layer (grid search when empty)', optional=True)),
        ('unit_grid', Key('ints', DEFAULT_UNIT_GRID, 'candidate unit counts')),
        ('init_std', Key('float', None, 'std of the free parameters (0.1 sqrt(2/fan_in) when empty)', optional=True)),
        ('optimizer', Key('str', 'adam', 'sgd or adam')),
        ('momentum', Key('float', 0.9, 'sgd momentum')),
        ('learning_rate', Key('float', 1e-3, 'step size')),
        ('epochs', Key('int', 20, 'number of epochs')),
        ('samples', Key('int', 100, 'MC samples of the variance evaluator')),
        ('variance_evaluator', Key('str', 'linearized', 'mc or linearized')),
        ('gradient_method', Key('str', 'finite_difference', 'finite_difference or analytic')),
        ('posterior', Key('str', 'diag_ggn', 'training-time last-layer posterior')),
        ('in_batch_size', Key('int', None, 'inlier batch size (full batch when empty)', optional=True)),
        ('out_batch_size', Key('int', None, 'outlier batch size (full batch when empty)', optional=True)),
        ('ood_kind', Key('str', 'auto', 'training outliers: auto, permute, blur, contrast, mixed or uniform')),
        ('ood_range', Key('floats', (-10.0, 10.0), 'range of the uniform outliers')),
        ('seed', Key('int', None, 'LULA seed', optional=True)),
    ])),
    ('eval', OrderedDict([
        ('ood_kinds', Key('strs', ('permute', 'blur', 'contrast', 'uniform', 'asymptotic'), 'outlier sets to report')),
        ('method', Key('str', 'mc', 'mc or probit_linearized')),
        ('samples', Key('int', 100, 'MC samples per prediction')),
        ('runs', Key('int', 10, 'repeated prediction runs')),
        ('include_aleatoric', Key('bool', True, 'report total (epistemic + 1/beta) regression std')),
        ('far_radius', Key('floats', (8.0, 12.0), 'radii of the far-field ring of the toy demo')),
        ('grid_size', Key('int', 50, 'points per axis of the demo grids')),
        ('seed', Key('int', None, 'prediction seed', optional=True)),
    ])),
])


class ExperimentConfig(object):
    """Parsed experiment configuration with the builders of the domain configs."""

    def __init__(self, values=None, seed=0):
        self.seed = int(seed)
        self.values = OrderedDict((section, OrderedDict((name, key.default) for name, key in keys.items())) for section, keys in SCHEMA.items())
        for section, entries in (values or {}).items():
            self.update(section, entries)

    def update(self, section, entries):
        if section not in SCHEMA:
            raise ConfigError('Unknown section <%s>, expected one of %s.' % (section, ', '.join(SECTIONS)))
        for name, value in entries.items():
            if name not in SCHEMA[section]:
                raise ConfigError('Unknown key %s.%s.' % (section, name))
            self.values[section][name] = value

    def __getitem__(self, section):
        return self.values[section]

    def with_seed(self, seed):
        """Copy of the configuration with another experiment seed."""
        return ExperimentConfig(self.values, seed)

    def section_seed(self, section):
        """The explicit seed of a section, or one derived from the experiment seed."""
        seed = self.values[section]['seed']
        if seed is None:
            return Rng(self.seed).derive(section).seed
        return seed

    @classmethod
    def from_element(cls, root):
        """Parses an <experiment> element.

        Raises:
            A ConfigError naming the first unknown or malformed section/key.
        """
        if root.tag != 'experiment':
            raise ConfigError('The configuration root must be <experiment>, got <%s>.' % (root.tag,))
        try:
            seed = int(root.get('seed', '0'))
        except ValueError:
            raise ConfigError('Invalid experiment seed %r.' % (root.get('seed'),))
        if not 0 <= seed < 2 ** 64:
            raise ConfigError('The experiment seed must be a 64-bit unsigned integer, got %s.' % (seed,))

        config = cls(seed=seed)
        for section in root:
            if not isinstance(section.tag, str):
                continue
            if section.tag not in SCHEMA:
                raise ConfigError('Unknown section <%s>, expected one of %s.' % (section.tag, ', '.join(SECTIONS)))
            entries = {}
            for elem in section:
                if not isinstance(elem.tag, str):
                    continue
                key = SCHEMA[section.tag].get(elem.tag)
                if key is None:
                    raise ConfigError('Unknown key %s.%s.' % (section.tag, elem.tag))
                entries[elem.tag] = key.parse('%s.%s' % (section.tag, elem.tag), elem.text)
            config.update(section.tag, entries)
        return config

    @classmethod
    def from_file(cls, path):
        try:
            root = XMLHelper.read(path)
        except etree.XMLSyntaxError as err:
            raise ConfigError('Malformed configuration %s: %s' % (path, err))
        except OSError as err:
            raise ConfigError('Cannot read the configuration %s: %s' % (path, err))
        return cls.from_element(root)

    def to_element(self, with_help=True):
        root = etree.Element('experiment', seed=str(self.seed))
        for section, keys in SCHEMA.items():
            elem = XMLHelper.sub(root, section)
            for name, key in keys.items():
                if with_help:
                    elem.append(etree.Comment(' %s ' % (key.help,)))
                XMLHelper.sub(elem, name, key.format(self.values[section][name]))
        return root

    def write(self, path, with_help=True):
        XMLHelper.write(self.to_element(with_help), path)

    # Builders

    @property
    def task(self):
        generator = self.values['data']['generator']
        if generator == 'two_moons':
            return 'classification'
        if generator == 'toy_regression':
            return 'regression'
        return self.values['data']['task']

    def loss_kind(self):
        model = self.values['model']
        name = model['loss']
        if name == 'auto':
            name = 'gaussian' if self.task == 'regression' else 'categorical'
        if name == 'gaussian':
            return LossKind.gaussian(model['noise_precision'])
        return LossKind(name)

    def split_spec(self):
        return SplitSpec(tuple(self.values['data']['split']), seed=Rng(self.section_seed('data')).derive('split').seed)

    def ood_params(self):
        return OodParams()

    def train_config(self):
        train = self.values['train']
        return TrainConfig(
            optimizer=train['optimizer'],
            momentum=train['momentum'],
            learning_rate=train['learning_rate'],
            epochs=train['epochs'],
            batch_size=train['batch_size'],
            weight_decay=train['weight_decay'],
            seed=self.section_seed('train'),
        )

    def lula_config(self):
        lula = self.values['lula']
        return LulaTrainConfig(
            optimizer=lula['optimizer'],
            learning_rate=lula['learning_rate'],
            momentum=lula['momentum'],
            epochs=lula['epochs'],
            samples=lula['samples'],
            variance_evaluator=lula['variance_evaluator'],
            gradient_method=lula['gradient_method'],
            posterior=lula['posterior'],
            in_batch_size=lula['in_batch_size'],
            out_batch_size=lula['out_batch_size'],
            seed=self.section_seed('lula'),
        )

    def tuning_predict_config(self):
        laplace = self.values['laplace']
        return PredictConfig(laplace['method'], samples=laplace['samples'], seed=self.section_seed('laplace'))

    def predict_config(self, run=0):
        evaluation = self.values['eval']
        seed = Rng(self.section_seed('eval')).derive('run', run).seed
        return PredictConfig(evaluation['method'], samples=evaluation['samples'], seed=seed)

    def check(self):
        """Builds every domain config once so that invalid values fail early.

        Raises:
            An ImproperlyConfigured exception for the first invalid value.
        """
        data, model = self.values['data'], self.values['model']
        if data['generator'] not in ('two_moons', 'toy_regression', 'csv'):
            raise ConfigError('Unknown data.generator %r.' % (data['generator'],))
        if data['generator'] == 'csv' and (not data['csv_path'] or data['target_column'] is None):
            raise ConfigError('data.csv_path and data.target_column are required with generator=csv.')
        if len(model['activations']) != len(model['hidden_dims']):
            raise ConfigError('model.activations needs one name per hidden layer (%s given for %s layers).' % (len(model['activations']), len(model['hidden_dims'])))
        if self.values['laplace']['tuning'] not in ('none', 'val_log_likelihood', 'ood_mmc'):
            raise ConfigError('Unknown laplace.tuning %r.' % (self.values['laplace']['tuning'],))
        if self.values['eval']['runs'] < 1:
            raise ConfigError('eval.runs must be at least 1.')
        if not np.all(np.asarray(self.values['laplace']['prior_grid']) >= 0):
            raise ConfigError('laplace.prior_grid cannot hold negative values.')
        self.loss_kind()
        self.split_spec()
        self.train_config()
        self.lula_config()
        self.tuning_predict_config()
        self.predict_config()
        return self


def load_config(path=None, seed=None):
    """Reads and checks a configuration file (all defaults when path is None); seed overrides the experiment seed."""
    config = ExperimentConfig() if path is None else ExperimentConfig.from_file(path)
    if seed is not None:
        config = config.with_seed(seed)
    return config.check()
