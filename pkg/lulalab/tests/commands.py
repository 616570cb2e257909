# Python stdlib
import io
import os
import os.path
import tempfile
from unittest import TestCase, mock

# Third-party
import numpy as np
import pandas as pd

# Internal
from .. import lula
from ..cli import main
from ..commands import COMMANDS, load_command_class
from ..commands.base import EXIT_OK, EXIT_FAILURE, EXIT_CONFIG_ERROR, prepare_data, resolve_ood_kind, training_outliers, evaluation_outliers
from ..commands.lula import check_predictions_preserved
from ..commands.demo_toy import DEMO_UNITS, run_stages
from ..config import ExperimentConfig, load_config
from ..data import Dataset
from ..laplace import map_predict
from ..metrics import mmc
from ..lula import LulaTrainingFailed, augment, load_augmentation
from ..network import load
from ..numerics import Rng
from ..training import LossKind, init_network
from ..utils import ImproperlyConfigured
from ..utils.xmlhelper import XMLHelper

SMALL_EXPERIMENT = """<experiment seed="%(seed)s">
  <data>
    <generator>%(generator)s</generator>
    <n_samples>60</n_samples>
  </data>
  <model>
    <hidden_dims>8 8</hidden_dims>
  </model>
  <train>
    <epochs>5</epochs>
    <learning_rate>0.01</learning_rate>
  </train>
  <laplace>
    <curvature>diag_ggn</curvature>
    <tuning>%(tuning)s</tuning>
    <prior_precision>%(prior_precision)s</prior_precision>
    <prior_grid>0.1 1 10</prior_grid>
    <samples>10</samples>
  </laplace>
  <lula>
    <units>%(units)s</units>
    <unit_grid>2 4</unit_grid>
    <epochs>2</epochs>
    <learning_rate>0.01</learning_rate>
    <gradient_method>analytic</gradient_method>
  </lula>
  <eval>
    <samples>10</samples>
    <runs>2</runs>
    <grid_size>5</grid_size>
  </eval>
</experiment>
"""


def write_experiment(tmp, seed=0, generator='two_moons', tuning='none', units='4', prior_precision=1.0):
    path = os.path.join(tmp, 'experiment.xml')
    with open(path, 'w') as f:
        f.write(SMALL_EXPERIMENT % {'seed': seed, 'generator': generator, 'tuning': tuning, 'units': units, 'prior_precision': prior_precision})
    return path


class CommandRunner(object):

    def invoke(self, *argv):
        self.stdout, self.stderr = io.StringIO(), io.StringIO()
        return main(list(argv), stdout=self.stdout, stderr=self.stderr)


class CommandRegistryTestCase(TestCase):

    def test_every_command_loads(self):
        for name in COMMANDS:
            command = load_command_class(name)()
            self.assertTrue(command.help)

    def test_unknown_command(self):
        self.assertRaises(KeyError, load_command_class, 'serve')


class ExitCodeTestCase(CommandRunner, TestCase):

    def test_unknown_key(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'experiment.xml')
            with open(path, 'w') as f:
                f.write('<experiment><lula><bogus>1</bogus></lula></experiment>')
            code = self.invoke('train', '--config', path, '--out', os.path.join(tmp, 'model.xml'))

        self.assertEqual(code, EXIT_CONFIG_ERROR)
        self.assertIn('lula.bogus', self.stderr.getvalue())

    def test_missing_model(self):
        with tempfile.TemporaryDirectory() as tmp:
            code = self.invoke('eval', '--model', os.path.join(tmp, 'missing.xml'))

        self.assertEqual(code, EXIT_FAILURE)

    def test_malformed_model(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'model.xml')
            with open(path, 'w') as f:
                f.write('<network format="lula-lab-network" version="1"><input_dim>2')
            code = self.invoke('laplace', '--model', path)

        self.assertEqual(code, EXIT_FAILURE)
        self.assertIn('Malformed', self.stderr.getvalue())

    def test_usage_error(self):
        self.assertEqual(self.invoke('laplace'), 2)
        self.assertEqual(self.invoke('deploy'), 2)

    def test_regression_needs_units(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = write_experiment(tmp, generator='toy_regression', units='')
            model = os.path.join(tmp, 'model.xml')
            self.assertEqual(self.invoke('train', '--config', config, '--out', model), EXIT_OK)
            code = self.invoke('lula', '--config', config, '--model', model, '--out', os.path.join(tmp, 'lula.xml'))

        self.assertEqual(code, EXIT_CONFIG_ERROR)


class ConfigReferenceCommandTestCase(CommandRunner, TestCase):

    def test_reference(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'reference.xml')
            code = self.invoke('config-reference', '--out', path)
            config = ExperimentConfig.from_file(path)

        self.assertEqual(code, EXIT_OK)
        self.assertEqual(config['lula']['epochs'], 20)
        self.assertEqual(config['eval']['far_radius'], (8.0, 12.0))


class PipelineTestCase(CommandRunner, TestCase):
    """train, laplace, lula and eval chained on a small two-moons experiment."""

    def test_pipeline(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = write_experiment(tmp, tuning='val_log_likelihood')
            model = os.path.join(tmp, 'model.xml')
            augmented = os.path.join(tmp, 'lula.xml')

            self.assertEqual(self.invoke('train', '--config', config, '--out', model), EXIT_OK, self.stderr.getvalue())
            history = pd.read_csv(os.path.join(tmp, 'model.history.csv'))
            self.assertEqual(list(history['epoch']), [1, 2, 3, 4, 5])

            self.assertEqual(self.invoke('laplace', '--config', config, '--model', model), EXIT_OK, self.stderr.getvalue())
            posterior = XMLHelper.read(os.path.join(tmp, 'model.laplace.xml'))
            self.assertEqual(posterior.get('curvature'), 'diag_ggn')
            self.assertEqual(len(XMLHelper.get_elements('tuning.candidate', posterior)), 3)

            self.assertEqual(self.invoke('lula', '--config', config, '--model', model, '--out', augmented), EXIT_OK, self.stderr.getvalue())
            aug = load_augmentation(os.path.join(tmp, 'lula.aug.xml'))
            self.assertEqual(aug.unit_counts, (0, 4))
            self.assertEqual(load(augmented).dims, (2, 8, 12, 2))
            self.assertTrue(os.path.isfile(os.path.join(tmp, 'lula.history.csv')))

            self.assertEqual(self.invoke('eval', '--config', config, '--model', augmented), EXIT_OK, self.stderr.getvalue())
            summary = pd.read_csv(os.path.join(tmp, 'lula.eval.csv'))
            confidences = pd.read_csv(os.path.join(tmp, 'lula.eval.confidences.csv'))
            root = XMLHelper.read(os.path.join(tmp, 'lula.eval.summary.xml'))

        # blur needs 3 features and is skipped on two moons.
        self.assertEqual(list(summary['dataset']), ['two_moons', 'permute', 'contrast', 'uniform', 'asymptotic'])
        self.assertTrue(np.all(summary['aur_mean'][1:] >= 0.0))
        self.assertEqual(set(confidences['dataset']), set(summary['dataset']))
        self.assertEqual(set(confidences['run']), {0, 1})
        self.assertEqual(list(confidences.columns), ['run', 'dataset', 'index', 'value'])
        self.assertEqual(len(confidences[confidences['run'] == 0]), len(confidences[confidences['run'] == 1]))
        self.assertEqual(root.get('runs'), '2')

    def test_ood_mmc_tuning(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = write_experiment(tmp, tuning='ood_mmc')
            model = os.path.join(tmp, 'model.xml')
            self.assertEqual(self.invoke('train', '--config', config, '--out', model), EXIT_OK, self.stderr.getvalue())
            self.assertEqual(self.invoke('laplace', '--config', config, '--model', model), EXIT_OK, self.stderr.getvalue())
            posterior = XMLHelper.read(os.path.join(tmp, 'model.laplace.xml'))

        tuning = XMLHelper.get_element(posterior, 'tuning')
        self.assertEqual(tuning.get('objective'), 'ood_mmc')
        self.assertEqual(len(XMLHelper.get_elements('candidate', tuning)), 3)
        self.assertIn(float(XMLHelper.get_text(posterior, 'prior_precision')), (0.1, 1.0, 10.0))

    def test_huge_prior_precision_matches_map(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = write_experiment(tmp, prior_precision=1e12)
            model = os.path.join(tmp, 'model.xml')
            self.assertEqual(self.invoke('train', '--config', config, '--out', model), EXIT_OK, self.stderr.getvalue())
            self.assertEqual(self.invoke('eval', '--config', config, '--model', model), EXIT_OK, self.stderr.getvalue())
            summary = pd.read_csv(os.path.join(tmp, 'model.eval.csv'))
            net = load(model)
            experiment = ExperimentConfig.from_file(config)

        splits = prepare_data(experiment)
        map_mmc = mmc(map_predict(net, experiment.loss_kind(), splits.test.features))
        rows = summary.set_index('dataset')
        self.assertAlmostEqual(rows.loc['two_moons', 'mmc_mean'], map_mmc, delta=1e-3)
        self.assertAlmostEqual(rows.loc['uniform', 'mmc_mean'], mmc(map_predict(net, experiment.loss_kind(), evaluation_outliers(experiment, splits.test)[2].features)), delta=1e-3)

    def test_unit_grid_search(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = write_experiment(tmp, units='')
            model = os.path.join(tmp, 'model.xml')
            self.assertEqual(self.invoke('train', '--config', config, '--out', model), EXIT_OK)
            code = self.invoke('lula', '--config', config, '--model', model, '--out', os.path.join(tmp, 'lula.xml'))
            units = pd.read_csv(os.path.join(tmp, 'lula.units.csv'))

        self.assertEqual(code, EXIT_OK, self.stderr.getvalue())
        self.assertEqual(list(units['units']), [2, 4])

    def test_seed_changes_model(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = write_experiment(tmp)
            first, second = os.path.join(tmp, 'first.xml'), os.path.join(tmp, 'second.xml')
            self.invoke('train', '--config', config, '--out', first, '--seed', '1')
            self.invoke('train', '--config', config, '--out', second, '--seed', '2')

            self.assertFalse(np.array_equal(load(first).weights[0], load(second).weights[0]))


class DemoToyTestCase(CommandRunner, TestCase):

    def run_demo(self, tmp, name):
        out = os.path.join(tmp, name)
        code = self.invoke('demo-toy', '--config', write_experiment(tmp), '--out', out)
        self.assertEqual(code, EXIT_OK, self.stderr.getvalue())
        contents = {}
        for filename in sorted(os.listdir(out)):
            with open(os.path.join(out, filename), 'rb') as f:
                contents[filename] = f.read()
        return contents

    def test_outputs_and_determinism(self):
        with tempfile.TemporaryDirectory() as tmp:
            first = self.run_demo(tmp, 'first')
            second = self.run_demo(tmp, 'second')
            grid = pd.read_csv(os.path.join(tmp, 'first', 'classification_lula.csv'))
            summary = XMLHelper.read(os.path.join(tmp, 'first', 'summary.xml'))

        csv_files = sorted(name for name in first if name.endswith('.csv'))
        self.assertEqual(csv_files, sorted('%s_%s.csv' % (task, stage) for task in ('regression', 'classification') for stage in ('map', 'laplace', 'lula')))
        self.assertEqual(first, second)
        self.assertEqual(len(grid), 25)
        self.assertEqual(len(XMLHelper.get_elements('task.stage', summary)), 6)

    def test_explicit_unit_count(self):
        untrained = lambda augmented, aug, *args, **kwargs: (augmented, [], None)
        with tempfile.TemporaryDirectory() as tmp:
            zero = load_config(write_experiment(tmp, units='0'))
            empty = load_config(write_experiment(tmp, units=''))
        splits = prepare_data(zero)

        with mock.patch.object(lula, 'train_lula', side_effect=untrained):
            without_units = run_stages(zero, splits, LossKind.categorical())
            default_units = run_stages(empty, splits, LossKind.categorical())

        self.assertEqual(without_units[2].net.dims, without_units[0].net.dims)
        self.assertEqual(default_units[2].net.dims, (2, 8, 8 + DEMO_UNITS, 2))


class OutlierSetsTestCase(TestCase):

    def test_training_outliers(self):
        config = ExperimentConfig()
        splits = prepare_data(config)
        outliers = training_outliers(config, splits.val)

        self.assertEqual(outliers.features.shape, splits.val.features.shape)
        self.assertTrue(np.all(np.abs(outliers.features) <= 10.0))

    def test_auto_kind(self):
        config = ExperimentConfig()
        moons = prepare_data(config).val
        wide = Dataset(np.ones((4, 3)), task='classification')
        regression = prepare_data(config, 'toy_regression').val

        self.assertEqual(resolve_ood_kind(config, 'laplace', moons), 'uniform')
        self.assertEqual(resolve_ood_kind(config, 'laplace', wide), 'mixed')
        self.assertEqual(resolve_ood_kind(config, 'lula', regression), 'uniform')

        config.update('laplace', {'ood_kind': 'glare'})
        self.assertRaises(ImproperlyConfigured, resolve_ood_kind, config, 'laplace', moons)

    def test_evaluation_outliers(self):
        config = ExperimentConfig()
        splits = prepare_data(config)
        names = [outlier.name for outlier in evaluation_outliers(config, splits.test)]

        self.assertEqual(names, ['permute', 'contrast', 'uniform', 'asymptotic'])


class PreservationCheckTestCase(TestCase):

    def test_check(self):
        net = init_network((2, 6, 3), ['relu'], Rng(0))
        augmented, _ = augment(net, (5,), Rng(1))

        self.assertLessEqual(check_predictions_preserved(net, augmented, Rng(2)), 1e-12)

    def test_broken_network(self):
        net = init_network((2, 6, 3), ['relu'], Rng(0))
        other = init_network((2, 6, 3), ['relu'], Rng(3))

        self.assertRaises(LulaTrainingFailed, check_predictions_preserved, net, other, Rng(2))
