# Python stdlib
from unittest import TestCase

# Third-party
import numpy as np

# Internal
from ..data import Dataset, gen_two_moons
from ..network import Network, forward, flatten_parameters
from ..numerics import Rng
from ..training import LossKind, TrainConfig, Sgd, Adam, TrainingDiverged, init_network, make_optimizer, map_loss, train_map
from ..utils import ImproperlyConfigured


class LossKindKnownValues(TestCase):

    def test_perfect_regression_fit(self):
        net = Network.from_arrays([[[2.0]]], [[0.0]], ['identity'])
        x = np.array([[1.0], [-0.5], [3.0]])
        value, _ = map_loss(net, x, 2.0 * x, LossKind.gaussian(1.0), 0.0)

        self.assertEqual(value, 0.0)

    def test_binary_uniform_prediction(self):
        nll = LossKind.binary().nll(np.zeros((2, 1)), [0, 1])

        np.testing.assert_allclose(nll, [np.log(2.0), np.log(2.0)], rtol=1e-12)

    def test_regularizer(self):
        # ||theta||^2 = 3 and the targets equal the outputs.
        net = Network.from_arrays([[[1.0, 1.0]]], [[1.0]], ['identity'])
        value, _ = map_loss(net, np.zeros((1, 2)), [[1.0]], LossKind.gaussian(1.0), 2.0)

        self.assertAlmostEqual(value, 3.0, places=12)

    def test_categorical(self):
        output = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        nll = LossKind.categorical().nll(output, [1, 0])

        np.testing.assert_allclose(nll, [np.log(3.0), np.log(1.0 + 2.0 * np.exp(-2.0))], rtol=1e-12)

    def test_gaussian_precision(self):
        nll = LossKind.gaussian(4.0).nll(np.array([[1.0]]), [[0.0]])

        np.testing.assert_allclose(nll, [2.0])

    def test_output_grad_matches_nll(self):
        rng = Rng(0)
        output = rng.standard_normal((5, 3))
        labels = np.array([0, 2, 1, 1, 0])
        loss = LossKind.categorical()
        eps = 1e-6
        expected = np.empty_like(output)
        for index in np.ndindex(*output.shape):
            step = np.zeros_like(output)
            step[index] = eps
            expected[index] = (loss.nll(output + step, labels).sum() - loss.nll(output - step, labels).sum()) / (2 * eps)

        np.testing.assert_allclose(loss.output_grad(output, labels), expected, rtol=1e-6, atol=1e-9)

    def test_hessians(self):
        hessians = LossKind.categorical().output_hessians(np.zeros((1, 2)))
        np.testing.assert_allclose(hessians[0], [[0.25, -0.25], [-0.25, 0.25]])

        np.testing.assert_allclose(LossKind.binary().output_hessians(np.zeros((1, 1))), [[[0.25]]])
        np.testing.assert_allclose(LossKind.gaussian(2.0).output_hessian_diagonals(np.zeros((3, 2))), np.full((3, 2), 2.0))

    def test_unknown_loss(self):
        self.assertRaises(ImproperlyConfigured, LossKind, 'hinge')
        self.assertRaises(ImproperlyConfigured, LossKind.gaussian, 0.0)

    def test_binary_output_dim(self):
        net = init_network((2, 2), [], Rng(0))

        self.assertRaises(ValueError, map_loss, net, np.ones((1, 2)), [1], LossKind.binary(), 0.0)

    def test_empty_batch(self):
        net = init_network((2, 1), [], Rng(0))

        self.assertRaises(ValueError, map_loss, net, np.zeros((0, 2)), [], LossKind.binary(), 0.0)

    def test_diverged(self):
        net = Network.from_arrays([[[1e200]]], [[0.0]], ['identity'])

        self.assertRaises(TrainingDiverged, map_loss, net, [[1e200]], [[0.0]], LossKind.gaussian(), 0.0)


class OptimizerTestCase(TestCase):

    def test_sgd_momentum(self):
        optimizer = Sgd(0.1, momentum=0.5)
        params = optimizer.step(np.zeros(1), np.ones(1))
        params = optimizer.step(params, np.ones(1))

        np.testing.assert_allclose(params, [-0.1 - 0.15])

    def test_adam_first_step(self):
        # The first bias-corrected Adam step has the size of the learning rate.
        optimizer = Adam(0.01)
        np.testing.assert_allclose(optimizer.update(np.array([3.0, -0.2])), [0.01, -0.01], rtol=1e-6)

    def test_make_optimizer(self):
        self.assertIsInstance(make_optimizer('adam', 0.1), Adam)
        self.assertIsInstance(make_optimizer('sgd', 0.1, 0.9), Sgd)
        self.assertRaises(ImproperlyConfigured, make_optimizer, 'rmsprop', 0.1)


class TrainConfigTestCase(TestCase):

    def test_defaults(self):
        config = TrainConfig()

        self.assertEqual(config.optimizer, 'adam')
        self.assertEqual(config.batch_size, 32)

    def test_invalid(self):
        self.assertRaises(ImproperlyConfigured, TrainConfig, optimizer='lbfgs')
        self.assertRaises(ImproperlyConfigured, TrainConfig, learning_rate=0.0)
        self.assertRaises(ImproperlyConfigured, TrainConfig, epochs=-1)
        self.assertRaises(ImproperlyConfigured, TrainConfig, batch_size=0)


class InitNetworkTestCase(TestCase):

    def test_shapes(self):
        net = init_network((4, 16, 8, 3), ['relu', 'tanh'], Rng(0))

        self.assertEqual(net.dims, (4, 16, 8, 3))
        self.assertEqual(net.activations, ('relu', 'tanh', 'identity'))
        self.assertTrue(all(np.all(b == 0.0) for b in net.biases))

    def test_determinism(self):
        np.testing.assert_array_equal(
            flatten_parameters(init_network((2, 8, 1), ['relu'], Rng(3))),
            flatten_parameters(init_network((2, 8, 1), ['relu'], Rng(3))),
        )

    def test_activation_count(self):
        self.assertRaises(ImproperlyConfigured, init_network, (2, 3, 4, 1), ['relu'], Rng(0))


class TrainMapTestCase(TestCase):

    def test_zero_epochs(self):
        net = init_network((2, 4, 1), ['relu'], Rng(0))
        data = Dataset(np.ones((3, 2)), np.zeros(3), task='regression')
        trained, history = train_map(net, data, LossKind.gaussian(), TrainConfig(epochs=0))

        self.assertIs(trained, net)
        self.assertEqual(history, [])

    def test_linear_regression(self):
        x = Rng(1).uniform(-1.0, 1.0, (200, 1))
        data = Dataset(x, 2.0 * x, task='regression')
        net = init_network((1, 1), [], Rng(2))
        config = TrainConfig(optimizer='sgd', momentum=0.5, learning_rate=0.1, epochs=50, batch_size=20, weight_decay=0.0)
        trained, history = train_map(net, data, LossKind.gaussian(), config)

        self.assertEqual(len(history), 50)
        self.assertLess(abs(trained.weights[0][0, 0] - 2.0), 0.05)
        self.assertLess(history[-1], history[0])

    def test_two_moons(self):
        data = gen_two_moons(200, 0.1, seed=0)
        net = init_network((2, 64, 64, 2), ['relu', 'relu'], Rng(0))
        config = TrainConfig(optimizer='adam', learning_rate=1e-2, epochs=200, batch_size=32, weight_decay=5e-4)
        trained, _ = train_map(net, data, LossKind.categorical(), config)
        accuracy = np.mean(np.argmax(forward(trained, data.features).output, axis=1) == data.targets)

        self.assertGreaterEqual(accuracy, 0.95)

    def test_seeded(self):
        data = gen_two_moons(50, 0.1, seed=4)
        net = init_network((2, 8, 2), ['tanh'], Rng(0))
        config = TrainConfig(epochs=3, batch_size=8, seed=9)

        np.testing.assert_array_equal(
            flatten_parameters(train_map(net, data, LossKind.categorical(), config)[0]),
            flatten_parameters(train_map(net, data, LossKind.categorical(), config)[0]),
        )


class MapLossGradientTestCase(TestCase):
    """map_loss parameter gradients against central differences."""

    def test_finite_differences(self):
        losses = [LossKind.categorical(), LossKind.binary(), LossKind.gaussian(2.0)]
        for trial in range(20):
            rng = Rng(100 + trial)
            loss = losses[trial % 3]
            k = 1 if loss.name == 'binary' else 3
            net = init_network((4, 5, 3, k), ['tanh', 'tanh'], rng.derive('net'))
            x = rng.standard_normal((6, 4))
            if loss.name == 'gaussian':
                targets = rng.standard_normal((6, k))
            else:
                targets = rng.integers(max(k, 2), size=6)
            lam = 0.5
            _, grads = map_loss(net, x, targets, loss, lam)
            theta = flatten_parameters(net)
            expected = np.empty_like(theta)
            for j in range(theta.size):
                step = np.zeros_like(theta)
                step[j] = 1e-6 * max(1.0, abs(theta[j]))
                plus, _ = map_loss(net.with_parameters(theta + step), x, targets, loss, lam)
                minus, _ = map_loss(net.with_parameters(theta - step), x, targets, loss, lam)
                expected[j] = (plus - minus) / (2 * step[j])

            error = np.linalg.norm(grads.flatten() - expected) / np.linalg.norm(expected)
            self.assertLessEqual(error, 1e-5, 'trial %s (%s)' % (trial, loss.name))


class WeightDecayTestCase(TestCase):
    """A larger prior precision shrinks the MAP estimate."""

    def test_ridge_norms(self):
        rng = Rng(3)
        x = rng.uniform(-1.0, 1.0, (50, 3))
        y = x @ np.array([[1.5], [-2.0], [0.5]]) + 0.3 + 0.1 * rng.standard_normal((50, 1))
        data = Dataset(x, y, task='regression')
        design = np.hstack([x, np.ones((50, 1))])
        net = init_network((3, 1), [], Rng(4))

        norms = []
        for lam in (0.0, 1.0, 10.0, 100.0):
            config = TrainConfig(optimizer='sgd', momentum=0.0, learning_rate=0.1, epochs=2000, batch_size=50, weight_decay=lam)
            trained, _ = train_map(net, data, LossKind.gaussian(), config)
            theta = flatten_parameters(trained)
            ridge = np.linalg.solve(design.T @ design + lam * np.eye(4), design.T @ y[:, 0])
            np.testing.assert_allclose(theta, ridge, rtol=1e-6, atol=1e-8)
            norms.append(np.linalg.norm(theta))

        self.assertTrue(all(later <= earlier + 1e-9 for earlier, later in zip(norms, norms[1:])), norms)
        self.assertLess(norms[-1], norms[0])
