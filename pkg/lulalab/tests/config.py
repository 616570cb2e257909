# Python stdlib
import os.path
import tempfile
from unittest import TestCase

# Internal
from ..config import ConfigError, ExperimentConfig, SCHEMA, load_config
from ..utils import ImproperlyConfigured
from ..utils.xmlhelper import XMLHelper

EXPERIMENT = b"""<?xml version="1.0" encoding="utf-8"?>
<experiment seed="7">
  <data>
    <generator>toy_regression</generator>
    <n_samples>80</n_samples>
    <x_range>-2 2</x_range>
    <standardize>true</standardize>
  </data>
  <model>
    <hidden_dims>16</hidden_dims>
    <activations>tanh</activations>
    <noise_precision>25</noise_precision>
  </model>
  <lula>
    <units>12</units>
    <in_batch_size></in_batch_size>
    <seed>99</seed>
  </lula>
</experiment>
"""


class ExperimentConfigKnownValues(TestCase):

    def setUp(self):
        self.config = ExperimentConfig.from_element(XMLHelper.parse(EXPERIMENT)).check()

    def test_values(self):
        self.assertEqual(self.config.seed, 7)
        self.assertEqual(self.config['data']['x_range'], (-2.0, 2.0))
        self.assertEqual(self.config['model']['hidden_dims'], (16,))
        self.assertIs(self.config['data']['standardize'], True)
        self.assertEqual(self.config['lula']['units'], 12)
        self.assertIsNone(self.config['lula']['in_batch_size'])

    def test_defaults(self):
        self.assertEqual(self.config['lula']['epochs'], 20)
        self.assertEqual(self.config['lula']['unit_grid'], (32, 64, 128, 256, 512))
        self.assertEqual(self.config['laplace']['curvature'], 'kfac_last_layer')

    def test_builders(self):
        loss = self.config.loss_kind()

        self.assertEqual(self.config.task, 'regression')
        self.assertEqual((loss.name, loss.noise_precision), ('gaussian', 25.0))
        self.assertEqual(self.config.lula_config().seed, 99)
        self.assertEqual(self.config.split_spec().fractions, (0.6, 0.2, 0.2))
        self.assertEqual(self.config.train_config().epochs, 100)

    def test_section_seeds(self):
        self.assertEqual(self.config.section_seed('lula'), 99)
        self.assertEqual(self.config.section_seed('train'), self.config.section_seed('train'))
        self.assertNotEqual(self.config.section_seed('train'), self.config.section_seed('data'))
        self.assertNotEqual(self.config.with_seed(8).section_seed('train'), self.config.section_seed('train'))

    def test_prediction_seeds(self):
        self.assertNotEqual(self.config.predict_config(0).seed, self.config.predict_config(1).seed)


class ExperimentConfigErrorsTestCase(TestCase):

    def parse(self, text):
        return ExperimentConfig.from_element(XMLHelper.parse(text))

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as context:
            self.parse('<experiment><lula><bogus>1</bogus></lula></experiment>')

        self.assertIn('lula.bogus', str(context.exception))

    def test_unknown_section(self):
        self.assertRaises(ConfigError, self.parse, '<experiment><optim/></experiment>')

    def test_bad_value(self):
        self.assertRaises(ConfigError, self.parse, '<experiment><train><epochs>ten</epochs></train></experiment>')
        self.assertRaises(ConfigError, self.parse, '<experiment><data><header>maybe</header></data></experiment>')

    def test_required_value(self):
        self.assertRaises(ConfigError, self.parse, '<experiment><train><epochs></epochs></train></experiment>')

    def test_bad_root_and_seed(self):
        self.assertRaises(ConfigError, self.parse, '<config/>')
        self.assertRaises(ConfigError, self.parse, '<experiment seed="-3"/>')

    def test_check(self):
        self.assertRaises(ConfigError, self.parse('<experiment><model><activations>relu</activations></model></experiment>').check)
        self.assertRaises(ConfigError, self.parse('<experiment><data><generator>csv</generator></data></experiment>').check)
        self.assertRaises(ConfigError, self.parse('<experiment><eval><runs>0</runs></eval></experiment>').check)

    def test_invalid_domain_value(self):
        config = self.parse('<experiment><lula><variance_evaluator>exact</variance_evaluator></lula></experiment>')

        self.assertRaises(ImproperlyConfigured, config.check)

    def test_missing_file(self):
        self.assertRaises(ConfigError, load_config, '/nonexistent/experiment.xml')


class ConfigReferenceTestCase(TestCase):

    def test_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'reference.xml')
            ExperimentConfig(seed=3).write(path)
            config = load_config(path)

        self.assertEqual(config.seed, 3)
        for section, keys in SCHEMA.items():
            for name, key in keys.items():
                if key.kind == 'floats':
                    self.assertEqual(len(config[section][name]), len(key.default))
                else:
                    self.assertEqual(config[section][name], key.default, '%s.%s' % (section, name))

    def test_seed_override(self):
        self.assertEqual(load_config(seed=12).seed, 12)
