"""MAP estimation: likelihood losses, weight-decay prior and first-order optimizers.

The MAP objective is

    L(theta) = sum_i -log p(y_i | f(x_i; theta)) + (lambda / 2) * ||theta||^2

with additive normalization constants (the 1/2 log 2 pi terms of the Gaussian)
dropped everywhere, so log-likelihood comparisons stay internally consistent.
"""
# Python stdlib
from dataclasses import dataclass

# Third-party
import numpy as np
from scipy.special import expit, log_softmax, softmax, log_expit

# Internal
from .log import default_logger as logger
from .network import Network, Layer, LayerSpec, forward, backward, flatten_parameters
from .numerics import Rng
from .utils import ImproperlyConfigured

LOSS_NAMES = ('gaussian', 'categorical', 'binary')
OPTIMIZER_NAMES = ('sgd', 'adam')


class TrainingDiverged(Exception):
    pass


@dataclass(frozen=True)
class LossKind:
    """Negative log-likelihood of the targets given the network outputs.

    gaussian: real targets (m x k), noise precision beta.
    categorical: integer labels in [0, k), softmax over k outputs.
    binary: labels in {0, 1}, a single logit output.
    """
    name: str
    noise_precision: float = 1.0

    def __post_init__(self):
        if self.name not in LOSS_NAMES:
            raise ImproperlyConfigured('Unknown loss %r, expected one of %s.' % (self.name, ', '.join(LOSS_NAMES)))
        if self.name == 'gaussian' and not self.noise_precision > 0:
            raise ImproperlyConfigured('The noise precision must be positive, got %s.' % (self.noise_precision,))

    @classmethod
    def gaussian(cls, noise_precision=1.0):
        return cls('gaussian', float(noise_precision))

    @classmethod
    def categorical(cls):
        return cls('categorical')

    @classmethod
    def binary(cls):
        return cls('binary')

    @property
    def is_classification(self):
        return self.name != 'gaussian'

    def n_classes(self, output_dim):
        """Number of predicted classes (2 for a binary logit)."""
        return 2 if self.name == 'binary' else output_dim

    def check_output_dim(self, output_dim):
        if self.name == 'binary' and output_dim != 1:
            raise ValueError('The binary loss needs a single output, got %s.' % (output_dim,))

    def nll(self, output, targets):
        """Per-point negative log-likelihood (constants dropped)."""
        if self.name == 'gaussian':
            residual = output - np.asarray(targets, dtype=np.float64).reshape(output.shape)
            return 0.5 * self.noise_precision * np.sum(residual ** 2, axis=1)

        labels = np.asarray(targets).astype(np.int64).ravel()
        if self.name == 'categorical':
            return -log_softmax(output, axis=1)[np.arange(len(labels)), labels]

        logit = output[:, 0]
        return -np.where(labels == 1, log_expit(logit), log_expit(-logit))

    def output_grad(self, output, targets):
        """Gradient of the summed negative log-likelihood w.r.t. the outputs."""
        if self.name == 'gaussian':
            return self.noise_precision * (output - np.asarray(targets, dtype=np.float64).reshape(output.shape))

        labels = np.asarray(targets).astype(np.int64).ravel()
        if self.name == 'categorical':
            grad = softmax(output, axis=1)
            grad[np.arange(len(labels)), labels] -= 1.0
            return grad

        return (expit(output[:, 0]) - labels)[:, None]

    def output_hessians(self, output):
        """Output-space Hessians of the negative log-likelihood, one k x k matrix per row.

        gaussian: beta * I; categorical: diag(p) - p p^T; binary: s (1 - s).
        """
        m, k = output.shape
        if self.name == 'gaussian':
            return np.broadcast_to(self.noise_precision * np.eye(k), (m, k, k)).copy()
        if self.name == 'categorical':
            p = softmax(output, axis=1)
            return p[:, :, None] * np.eye(k)[None, :, :] - p[:, :, None] * p[:, None, :]
        s = expit(output[:, 0])
        return (s * (1.0 - s))[:, None, None]

    def output_hessian_diagonals(self, output):
        """Diagonals of output_hessians, one row per input."""
        m, k = output.shape
        if self.name == 'gaussian':
            return np.full((m, k), self.noise_precision)
        if self.name == 'categorical':
            p = softmax(output, axis=1)
            return p * (1.0 - p)
        s = expit(output[:, 0])
        return (s * (1.0 - s))[:, None]


@dataclass
class TrainConfig:
    optimizer: str = 'adam'
    momentum: float = 0.9
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    weight_decay: float = 5e-4
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZER_NAMES:
            raise ImproperlyConfigured('Unknown optimizer %r, expected one of %s.' % (self.optimizer, ', '.join(OPTIMIZER_NAMES)))
        if not self.learning_rate > 0:
            raise ImproperlyConfigured('The learning rate must be positive, got %s.' % (self.learning_rate,))
        if self.epochs < 0:
            raise ImproperlyConfigured('The number of epochs cannot be negative, got %s.' % (self.epochs,))
        if self.batch_size < 1:
            raise ImproperlyConfigured('The batch size must be at least 1, got %s.' % (self.batch_size,))
        if self.weight_decay < 0:
            raise ImproperlyConfigured('The weight decay cannot be negative, got %s.' % (self.weight_decay,))


class Optimizer(object):
    """First-order optimizer over a flat parameter vector."""

    def __init__(self, learning_rate):
        self.learning_rate = learning_rate

    def update(self, grad):
        """Returns the step to subtract from the parameters."""
        raise NotImplementedError

    def step(self, params, grad):
        return params - self.update(grad)


class Sgd(Optimizer):
    """Gradient descent with heavy-ball momentum: v = mu v + g; step = alpha v."""

    def __init__(self, learning_rate, momentum=0.0):
        super(Sgd, self).__init__(learning_rate)
        self.momentum = momentum
        self.velocity = None

    def update(self, grad):
        if self.velocity is None:
            self.velocity = np.zeros_like(grad)
        self.velocity = self.momentum * self.velocity + grad
        return self.learning_rate * self.velocity


class Adam(Optimizer):
    """Adam with bias-corrected first and second moment estimates."""

    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        super(Adam, self).__init__(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self.exp_avg = None
        self.exp_avg_sq = None

    def update(self, grad):
        if self.exp_avg is None:
            self.exp_avg = np.zeros_like(grad)
            self.exp_avg_sq = np.zeros_like(grad)
        self.steps += 1
        self.exp_avg = self.beta1 * self.exp_avg + (1.0 - self.beta1) * grad
        self.exp_avg_sq = self.beta2 * self.exp_avg_sq + (1.0 - self.beta2) * grad * grad
        bias_correction1 = 1.0 - self.beta1 ** self.steps
        bias_correction2 = 1.0 - self.beta2 ** self.steps
        return self.learning_rate * (self.exp_avg / bias_correction1) / (np.sqrt(self.exp_avg_sq / bias_correction2) + self.eps)


def make_optimizer(name, learning_rate, momentum=0.0):
    if name == 'sgd':
        return Sgd(learning_rate, momentum)
    if name == 'adam':
        return Adam(learning_rate)
    raise ImproperlyConfigured('Unknown optimizer %r.' % (name,))


def init_network(dims, activations, rng):
    """Draws a network with weights N(0, 2/fan_in) for relu/selu, N(0, 1/fan_in) otherwise, and zero biases.

    Args:
        dims: (n_0, n_1, ..., n_L)
        activations: L names, or L - 1 hidden names (identity is appended for the output layer)
        rng: a Rng
    """
    dims = [int(d) for d in dims]
    activations = list(activations)
    if len(activations) == len(dims) - 2:
        activations.append('identity')
    if len(activations) != len(dims) - 1:
        raise ImproperlyConfigured('Expected %s activations for dims %s, got %s.' % (len(dims) - 1, dims, len(activations)))

    layers = []
    for fan_in, fan_out, activation in zip(dims[:-1], dims[1:], activations):
        gain = 2.0 if activation in ('relu', 'selu') else 1.0
        weight = rng.standard_normal((fan_out, fan_in)) * np.sqrt(gain / fan_in)
        layers.append(Layer(LayerSpec(fan_in, fan_out, activation), weight, np.zeros(fan_out)))
    return Network(layers)


def map_loss(net, features, targets, loss, prior_precision):
    """MAP objective and its parameter gradients on a batch.

    Args:
        net: a Network
        features: m x n inputs
        targets: targets matching the loss kind
        loss: a LossKind
        prior_precision: lambda >= 0

    Returns:
        A (value, ParameterGradients) pair, value = sum of nll + lambda/2 ||theta||^2.

    Raises:
        A ValueError for an empty batch.
        A TrainingDiverged exception when the loss is not finite.
    """
    if len(features) == 0:
        raise ValueError('The batch is empty.')
    loss.check_output_dim(net.output_dim)

    trace = forward(net, features)
    theta = flatten_parameters(net)
    value = float(np.sum(loss.nll(trace.output, targets)) + 0.5 * prior_precision * theta @ theta)
    if not np.isfinite(value):
        raise TrainingDiverged('%s - MAP loss is not finite (%s).' % (net.log_desc, value))

    grads, _ = backward(net, trace, loss.output_grad(trace.output, targets))
    grads.weights = [g + prior_precision * w for g, w in zip(grads.weights, net.weights)]
    grads.biases = [g + prior_precision * b for g, b in zip(grads.biases, net.biases)]
    return value, grads


def train_map(net, data, loss, config):
    """Trains net by minibatch MAP estimation on data.

    Each step minimizes the per-point objective (1/B) sum_batch nll + lambda / (2 m) ||theta||^2,
    which has the same minimizer as the summed objective over the m training points.

    Args:
        net: the initial Network
        data: a Dataset (features, targets)
        loss: a LossKind
        config: a TrainConfig

    Returns:
        A (trained Network, history) pair; history holds the full-data objective divided by m after each epoch.

    Raises:
        A TrainingDiverged exception when a loss becomes non-finite.
    """
    log_desc = '%s - MAP training' % (net.log_desc,)
    history = []
    if config.epochs == 0:
        logger.info('%s => 0 epochs, network unchanged [OK]' % (log_desc,))
        return net, history

    features, targets = data.features, data.targets
    m = len(features)
    if m == 0:
        raise ValueError('%s => the training set is empty.' % (log_desc,))

    rng = Rng(config.seed)
    optimizer = make_optimizer(config.optimizer, config.learning_rate, config.momentum)
    theta = flatten_parameters(net)
    batch_size = min(config.batch_size, m)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(m)
        for start in range(0, m, batch_size):
            index = order[start:start + batch_size]
            batch_net = net.with_parameters(theta)
            value, grads = map_loss(batch_net, features[index], targets[index], loss, 0.0)
            grad = grads.flatten() / len(index) + (config.weight_decay / m) * theta
            theta = optimizer.step(theta, grad)
            if not np.all(np.isfinite(theta)):
                raise TrainingDiverged('%s => parameters became non-finite at epoch %s [KO]' % (log_desc, epoch))

        value, _ = map_loss(net.with_parameters(theta), features, targets, loss, config.weight_decay)
        history.append(value / m)
        logger.debug('%s => epoch %s/%s objective=%.6g' % (log_desc, epoch, config.epochs, history[-1]))

    logger.info('%s => %s epochs, final objective=%.6g [OK]' % (log_desc, config.epochs, history[-1]))
    return net.with_parameters(theta), history
