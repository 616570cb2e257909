# Python stdlib
import os.path
import tempfile
from unittest import TestCase

# Third-party
import numpy as np

# Internal
from ..data import (
    Dataset, DataFormatError, OodParams, SplitSpec, gen_two_moons, gen_toy_regression, gen_uniform_noise,
    load_csv, split, standardize, synthesize_ood, unstandardize,
)
from ..numerics import Rng
from ..utils import ImproperlyConfigured


def write_csv(tmp, content):
    path = os.path.join(tmp, 'data.csv')
    with open(path, 'w', encoding='utf-8') as f:
        f.write(content)
    return path


class DatasetTestCase(TestCase):

    def test_regression_targets(self):
        data = Dataset(np.ones((3, 2)), [1.0, 2.0, 3.0], task='regression')

        self.assertEqual(data.targets.shape, (3, 1))
        self.assertEqual(data.n_features, 2)

    def test_labels(self):
        data = Dataset(np.ones((3, 2)), [0, 2, 1], task='classification')

        self.assertEqual(data.n_classes, 3)
        self.assertRaises(ValueError, Dataset, np.ones((2, 2)), [0, -1], task='classification')
        self.assertRaises(ValueError, Dataset, np.ones((2, 2)), [0.5, 1.0], task='classification')

    def test_row_counts(self):
        self.assertRaises(ValueError, Dataset, np.ones((3, 2)), [0, 1], task='classification')

    def test_role(self):
        self.assertRaises(ValueError, Dataset, np.ones((3, 2)), role='holdout')


class TwoMoonsTestCase(TestCase):

    def test_noiseless_geometry(self):
        data = gen_two_moons(101, 0.0, seed=0)
        x, y = data.features[:, 0], data.features[:, 1]
        upper = data.targets == 0

        np.testing.assert_allclose(x[upper] ** 2 + y[upper] ** 2, 1.0, atol=1e-12)
        np.testing.assert_allclose((x[~upper] - 1.0) ** 2 + (y[~upper] - 0.5) ** 2, 1.0, atol=1e-12)
        self.assertTrue(np.all(y[upper] >= -1e-12))
        self.assertTrue(np.all(y[~upper] <= 0.5 + 1e-12))

    def test_balanced(self):
        self.assertEqual(list(np.bincount(gen_two_moons(1000, 0.1, seed=1).targets)), [500, 500])
        counts = np.bincount(gen_two_moons(7, 0.1, seed=1).targets)
        self.assertLessEqual(abs(counts[0] - counts[1]), 1)

    def test_determinism(self):
        np.testing.assert_array_equal(gen_two_moons(50, 0.1, seed=3).features, gen_two_moons(50, 0.1, seed=3).features)
        self.assertFalse(np.array_equal(gen_two_moons(50, 0.1, seed=3).features, gen_two_moons(50, 0.1, seed=4).features))

    def test_too_small(self):
        self.assertRaises(ValueError, gen_two_moons, 1)


class ToyRegressionTestCase(TestCase):

    def test_noiseless(self):
        data = gen_toy_regression(40, (-4.0, 4.0), 0.0, seed=0)

        np.testing.assert_array_equal(data.targets, np.sin(2.0 * data.features))

    def test_range_and_gap(self):
        x = gen_toy_regression(500, (-4.0, 4.0), 0.1, seed=1).features.ravel()

        self.assertTrue(np.all((x >= -4.0) & (x <= 4.0)))
        # Nothing is observed in the middle of the range.
        self.assertFalse(np.any((x > -0.8) & (x < 0.8)))

    def test_determinism(self):
        np.testing.assert_array_equal(gen_toy_regression(30, seed=5).targets, gen_toy_regression(30, seed=5).targets)

    def test_invalid_range(self):
        self.assertRaises(ValueError, gen_toy_regression, 10, (1.0, 1.0))


class SynthesizeOodTestCase(TestCase):

    def setUp(self):
        self.data = Dataset(Rng(0).standard_normal((20, 6)), role='in')

    def test_permute_multiset(self):
        out = synthesize_ood(self.data, 'permute', Rng(1))

        np.testing.assert_array_equal(np.sort(out.features, axis=1), np.sort(self.data.features, axis=1))
        self.assertEqual(out.role, 'out')

    def test_contrast_identity(self):
        out = synthesize_ood(self.data, 'contrast', Rng(2), OodParams(contrast_range=(1.0, 1.0)))

        np.testing.assert_allclose(out.features, self.data.features, rtol=0, atol=1e-12)

    def test_contrast_shrinks_rows(self):
        out = synthesize_ood(self.data, 'contrast', Rng(3))

        self.assertTrue(np.all(out.features.std(axis=1) <= 0.3 * self.data.features.std(axis=1) + 1e-12))

    def test_blur_constant_rows(self):
        data = Dataset(np.tile([[2.5], [-1.0]], (1, 5)))
        out = synthesize_ood(data, 'blur', Rng(4))

        np.testing.assert_allclose(out.features, data.features, rtol=0, atol=1e-12)

    def test_blur_needs_features(self):
        self.assertRaises(ValueError, synthesize_ood, Dataset(np.ones((3, 2))), 'blur', Rng(5))

    def test_shapes_and_finite(self):
        for kind in ('permute', 'blur', 'contrast', 'mixed'):
            out = synthesize_ood(self.data, kind, Rng(6))
            self.assertEqual(out.features.shape, self.data.features.shape)
            self.assertTrue(np.all(np.isfinite(out.features)))

    def test_invalid(self):
        self.assertRaises(ValueError, synthesize_ood, self.data, 'rotate', Rng(7))
        self.assertRaises(ValueError, synthesize_ood, Dataset(np.zeros((0, 4))), 'permute', Rng(7))


class UniformNoiseTestCase(TestCase):

    def test_asymptotic_scale(self):
        features = gen_uniform_noise(100, 3, 0.0, 1.0, seed=0, scale=5000.0).features

        self.assertTrue(np.all((features >= 0.0) & (features <= 5000.0)))
        self.assertGreater(features.max(), 1.0)

    def test_plain(self):
        features = gen_uniform_noise(100, 2, -10.0, 10.0, seed=1).features

        self.assertTrue(np.all((features >= -10.0) & (features <= 10.0)))

    def test_determinism(self):
        np.testing.assert_array_equal(gen_uniform_noise(5, 2, seed=2).features, gen_uniform_noise(5, 2, seed=2).features)

    def test_invalid_range(self):
        self.assertRaises(ValueError, gen_uniform_noise, 5, 2, 1.0, 0.0)


class StandardizeTestCase(TestCase):

    def setUp(self):
        rng = Rng(0)
        self.train = Dataset(3.0 + 2.0 * rng.standard_normal((50, 3)), rng.standard_normal(50), task='regression')
        self.val = Dataset(rng.standard_normal((10, 3)), rng.standard_normal(10), role='val', task='regression')

    def test_moments(self):
        train, _, stats = standardize(self.train)

        np.testing.assert_allclose(train.features.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(train.features.std(axis=0), 1.0, atol=1e-10)
        self.assertIs(train.stats, stats)

    def test_idempotent(self):
        once, _, _ = standardize(self.train)
        twice, _, _ = standardize(once)

        np.testing.assert_allclose(twice.features, once.features, atol=1e-10)

    def test_constant_column(self):
        features = self.train.features.copy()
        features[:, 1] = 7.0
        train, _, stats = standardize(Dataset(features, self.train.targets, task='regression'))

        np.testing.assert_array_equal(train.features[:, 1], np.zeros(50))
        self.assertEqual(stats.std[1], 1.0)

    def test_train_statistics(self):
        train, (val,), stats = standardize(self.train, [self.val])

        np.testing.assert_allclose(val.features, (self.val.features - stats.mean) / stats.std)
        self.assertFalse(np.allclose(val.features.mean(axis=0), 0.0, atol=1e-10))

    def test_round_trip(self):
        train, (val,), _ = standardize(self.train, [self.val], targets=True)

        np.testing.assert_allclose(unstandardize(val).features, self.val.features, atol=1e-10)
        np.testing.assert_allclose(unstandardize(val).targets, self.val.targets, atol=1e-10)
        np.testing.assert_allclose(train.targets.mean(), 0.0, atol=1e-10)


class SplitTestCase(TestCase):

    def setUp(self):
        self.data = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10.0), task='regression')

    def test_sizes(self):
        train, val, test = split(self.data, SplitSpec((0.6, 0.2, 0.2), seed=0))

        self.assertEqual((len(train), len(val), len(test)), (6, 2, 2))
        rows = np.concatenate([train.features[:, 0], val.features[:, 0], test.features[:, 0]])
        self.assertEqual(sorted(rows), list(np.arange(0.0, 20.0, 2.0)))
        self.assertEqual((train.role, val.role, test.role), ('train', 'val', 'test'))

    def test_everything_in_train(self):
        train, val, test = split(self.data, SplitSpec((1.0, 0.0, 0.0)))

        self.assertEqual((len(train), len(val), len(test)), (10, 0, 0))

    def test_seeded(self):
        first = split(self.data, SplitSpec(seed=3))[0].features
        np.testing.assert_array_equal(first, split(self.data, SplitSpec(seed=3))[0].features)

    def test_invalid_fractions(self):
        self.assertRaises(ImproperlyConfigured, SplitSpec, (0.5, 0.2, 0.2))
        self.assertRaises(ImproperlyConfigured, SplitSpec, (0.5, 0.5))


class LoadCsvTestCase(TestCase):

    def test_known_values(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(tmp, 'a,y,b\n1.5,0,-2\n2.25,1,3e-1\n-0.5,1,4\n')
            data = load_csv(path, 'y', task='classification')

        np.testing.assert_array_equal(data.features, [[1.5, -2.0], [2.25, 0.3], [-0.5, 4.0]])
        np.testing.assert_array_equal(data.targets, [0, 1, 1])
        self.assertEqual(data.name, 'data.csv')

    def test_no_header(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(tmp, '1,2,3\n4,5,6\n')
            data = load_csv(path, 0, header=False)

        np.testing.assert_array_equal(data.features, [[2.0, 3.0], [5.0, 6.0]])
        np.testing.assert_array_equal(data.targets, [[1.0], [4.0]])

    def test_non_numeric_cell(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(tmp, 'a,b,c\n1,2,3\n4,5,x\n')
            with self.assertRaises(DataFormatError) as context:
                load_csv(path, 'a')

        self.assertIn('row 2, column 3', str(context.exception))

    def test_missing_target(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(tmp, 'a,b\n1,2\n')
            self.assertRaises(DataFormatError, load_csv, path, 'y')
