"""LULA units: zero-weight hidden units that only change the Laplace posterior.

Adding m_l units to hidden layer l expands its parameters to::

    W~(l) = [[W(l), 0],      b~(l) = [b(l);
             [W^(l), 0]]               b^(l)]

and the output layer to W~(L) = [W(L), 0], b~(L) = b(L). The zero blocks keep every
network output unchanged; the free blocks W^(l), b^(l) are trained to lower the
output variance on inliers and raise it on outliers, under a last-layer posterior.
"""
# Python stdlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

# Third-party
import numpy as np
from lxml import etree  # http://lxml.de/

# Internal
from . import laplace
from .log import default_logger as logger
from .metrics import mmc
from .network import Network, Layer, LayerSpec, forward, backward_features, flatten_parameters, ParameterGradients
from .numerics import NotPositiveDefinite, Rng
from .settings import THREADS
from .training import make_optimizer, OPTIMIZER_NAMES
from .utils import ImproperlyConfigured
from .utils.serializers import serialize_mask, deserialize_mask, DeserializationFailed
from .utils.xmlhelper import XMLHelper, ElementNotFound

VARIANCE_EVALUATORS = ('mc', 'linearized')
GRADIENT_METHODS = ('finite_difference', 'analytic')
DEFAULT_UNIT_GRID = (32, 64, 128, 256, 512)
FD_RELATIVE_STEP = 1e-4

AUGMENTATION_FORMAT = 'lula-lab-augmentation'
AUGMENTATION_VERSION = '1'


class LulaTrainingFailed(Exception):
    pass


@dataclass
class LulaAugmentation:
    """Added unit counts and the masks of the free parameters.

    masks holds one (weight mask, bias mask) pair per layer of the augmented
    network, true exactly on the W^(l) and b^(l) blocks.
    """
    unit_counts: tuple
    masks: list
    init_std: tuple
    original_dims: tuple

    @property
    def n_free(self):
        return int(sum(w.sum() + b.sum() for w, b in self.masks))

    @property
    def augmented_dims(self):
        counts = (0,) + tuple(self.unit_counts) + (0,)
        return tuple(d + m for d, m in zip(self.original_dims, counts))

    def flat_mask(self):
        """Boolean mask over the flattened parameters of the augmented network."""
        return np.concatenate([np.concatenate([w.ravel(order='C'), b]) for w, b in self.masks])

    def free_indices(self):
        return np.flatnonzero(self.flat_mask())

    @property
    def log_desc(self):
        return '<LulaAugmentation %s>' % ('-'.join(str(m) for m in self.unit_counts),)


@dataclass
class LulaTrainConfig:
    optimizer: str = 'adam'
    learning_rate: float = 1e-3
    momentum: float = 0.9
    epochs: int = 20
    samples: int = 100
    variance_evaluator: str = 'linearized'
    gradient_method: str = 'finite_difference'
    posterior: str = 'diag_ggn'
    in_batch_size: int = None
    out_batch_size: int = None
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZER_NAMES:
            raise ImproperlyConfigured('Unknown optimizer %r, expected one of %s.' % (self.optimizer, ', '.join(OPTIMIZER_NAMES)))
        if not self.learning_rate > 0:
            raise ImproperlyConfigured('The learning rate must be positive, got %s.' % (self.learning_rate,))
        if self.epochs < 0:
            raise ImproperlyConfigured('The number of epochs cannot be negative, got %s.' % (self.epochs,))
        if self.samples < 1:
            raise ImproperlyConfigured('At least one sample is needed, got %s.' % (self.samples,))
        if self.variance_evaluator not in VARIANCE_EVALUATORS:
            raise ImproperlyConfigured('Unknown variance evaluator %r, expected one of %s.' % (self.variance_evaluator, ', '.join(VARIANCE_EVALUATORS)))
        if self.gradient_method not in GRADIENT_METHODS:
            raise ImproperlyConfigured('Unknown gradient method %r, expected one of %s.' % (self.gradient_method, ', '.join(GRADIENT_METHODS)))
        if self.posterior not in laplace.CURVATURE_KINDS:
            raise ImproperlyConfigured('Unknown posterior kind %r, expected one of %s.' % (self.posterior, ', '.join(laplace.CURVATURE_KINDS)))
        if self.gradient_method == 'analytic' and (self.variance_evaluator != 'linearized' or self.posterior != 'diag_ggn'):
            raise ImproperlyConfigured('The analytic gradient needs the linearized evaluator and a diag_ggn posterior.')
        for name in ('in_batch_size', 'out_batch_size'):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ImproperlyConfigured('%s must be at least 1, got %s.' % (name, value))


def default_init_std(fan_in):
    return 0.1 * math.sqrt(2.0 / fan_in)


def penultimate_counts(net, units):
    """Unit counts adding units to the last hidden layer only."""
    if len(net.layers) < 2:
        raise ImproperlyConfigured('%s has no hidden layer to augment.' % (net.log_desc,))
    return (0,) * (len(net.layers) - 2) + (int(units),)


def augment(net, counts, rng, init_std=None):
    """Adds LULA units to the hidden layers of net.

    Args:
        net: a MAP-trained Network
        counts: one unit count per hidden layer (L - 1 values)
        rng: a Rng drawing the free blocks
        init_std: the standard deviation of the free blocks; a scalar, one value per
            hidden layer, or None for 0.1 * sqrt(2 / fan_in)

    Returns:
        An (augmented Network, LulaAugmentation) pair.

    Raises:
        An ImproperlyConfigured exception when the counts do not match the hidden layers.
    """
    counts = tuple(int(m) for m in counts)
    n_hidden = len(net.layers) - 1
    if len(counts) != n_hidden:
        raise ImproperlyConfigured('%s has %s hidden layer(s), got %s unit counts: the input and output layers cannot be augmented.' % (net.log_desc, n_hidden, len(counts)))
    if any(m < 0 for m in counts):
        raise ImproperlyConfigured('Unit counts cannot be negative, got %s.' % (counts,))

    if init_std is None:
        stds = tuple(default_init_std(layer.spec.in_dim) for layer in net.layers[:-1])
    elif np.ndim(init_std) == 0:
        stds = (float(init_std),) * n_hidden
    else:
        stds = tuple(float(s) for s in init_std)
        if len(stds) != n_hidden:
            raise ImproperlyConfigured('Expected %s init_std values, got %s.' % (n_hidden, len(stds)))

    start = time.time()
    layers, masks = [], []
    for index, layer in enumerate(net.layers):
        rows, cols = layer.spec.out_dim, layer.spec.in_dim
        added_rows = counts[index] if index < n_hidden else 0
        added_cols = counts[index - 1] if index > 0 else 0

        weight = np.zeros((rows + added_rows, cols + added_cols))
        weight[:rows, :cols] = layer.weight
        bias = np.concatenate([layer.bias, np.zeros(added_rows)])
        weight_mask = np.zeros(weight.shape, dtype=bool)
        bias_mask = np.zeros(bias.shape, dtype=bool)
        if added_rows:
            weight[rows:, :cols] = stds[index] * rng.standard_normal((added_rows, cols))
            bias[rows:] = stds[index] * rng.standard_normal(added_rows)
            weight_mask[rows:, :cols] = True
            bias_mask[rows:] = True

        spec = LayerSpec(cols + added_cols, rows + added_rows, layer.spec.activation)
        layers.append(Layer(spec, weight, bias))
        masks.append((weight_mask, bias_mask))

    augmented = Network(layers)
    aug = LulaAugmentation(unit_counts=counts, masks=masks, init_std=stds, original_dims=tuple(net.dims))
    logger.info('%s - Augmentation %s => %s, %s free parameters in %.3fs [OK]' % (net.log_desc, aug.log_desc, augmented.log_desc, aug.n_free, time.time() - start))
    return augmented, aug


def strip(net, aug):
    """Removes the LULA units of an augmented network (inverse of augment)."""
    counts = (0,) + tuple(aug.unit_counts) + (0,)
    weights, biases = [], []
    for index, layer in enumerate(net.layers):
        rows = layer.spec.out_dim - counts[index + 1]
        cols = layer.spec.in_dim - counts[index]
        weights.append(layer.weight[:rows, :cols])
        biases.append(layer.bias[:rows])
    return Network.from_arrays(weights, biases, net.activations)


def check_structure(net, aug, original=None):
    """True when the structural zero blocks (and the MAP blocks of original, if given) hold bitwise."""
    theta = flatten_parameters(net)
    fixed = ~aug.flat_mask()
    if original is None:
        counts = (0,) + tuple(aug.unit_counts) + (0,)
        for index, layer in enumerate(net.layers):
            if counts[index] and np.any(layer.weight[:, layer.spec.in_dim - counts[index]:] != 0.0):
                return False
        return True
    expected, _ = augment(original, aug.unit_counts, Rng(0), init_std=0.0)
    return bool(np.array_equal(theta[fixed], flatten_parameters(expected)[fixed]))


def mask_gradient(grads, aug):
    """Zeroes every gradient entry outside the free blocks.

    Args:
        grads: ParameterGradients or a flattened gradient vector
        aug: the LulaAugmentation

    Raises:
        A ValueError on shape mismatch.
    """
    if isinstance(grads, ParameterGradients):
        if len(grads.weights) != len(aug.masks) or any(g.shape != w.shape for g, (w, _) in zip(grads.weights, aug.masks)):
            raise ValueError('Gradient shapes do not match the augmentation masks.')
        return ParameterGradients(
            [np.where(w, g, 0.0) for g, (w, _) in zip(grads.weights, aug.masks)],
            [np.where(b, g, 0.0) for g, (_, b) in zip(grads.biases, aug.masks)],
        )

    grads = np.asarray(grads, dtype=np.float64)
    mask = aug.flat_mask()
    if grads.shape != mask.shape:
        raise ValueError('Gradient of shape %s does not match %s masked parameters.' % (grads.shape, mask.size))
    return np.where(mask, grads, 0.0)


def _features(data):
    return data.features if hasattr(data, 'features') else np.asarray(data, dtype=np.float64)


def total_variances(net, post, x, cfg):
    """Total output variance nu(x) = sum_i var f_i(x) for every row of x."""
    if cfg.variance_evaluator == 'linearized':
        return laplace.linearized_variances(net, post, x).sum(axis=1)
    samples = laplace.sample_params(post, Rng(cfg.seed), cfg.samples)
    outputs = laplace.sampled_outputs(net, post, x, samples)
    return np.var(outputs, axis=0).sum(axis=1)


def total_variance(net, post, x, cfg):
    """Total output variance of a single input."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError('A single input vector is required, got shape %s.' % (x.shape,))
    return float(total_variances(net, post, x[None, :], cfg)[0])


def lula_objective(net, post, in_batch, out_batch, cfg):
    """Mean total variance over the inliers minus the mean over the outliers."""
    in_batch, out_batch = _features(in_batch), _features(out_batch)
    if not len(in_batch) or not len(out_batch):
        raise ValueError('Both the inlier and the outlier batch must be non-empty.')
    return float(np.mean(total_variances(net, post, in_batch, cfg)) - np.mean(total_variances(net, post, out_batch, cfg)))


def fit_last_layer_posterior(net, fit_data, loss, prior_precision, kind='diag_ggn'):
    """Last-layer Laplace posterior of an (augmented) network."""
    curvature = laplace.fit_curvature(net, fit_data, loss, kind, 'last_layer')
    return laplace.build_posterior(curvature, laplace.subset_mean(net, 'last_layer'), prior_precision)


def _objective_at(net, theta, fit_data, in_batch, out_batch, loss, prior_precision, cfg):
    """Objective with the posterior refitted at theta."""
    candidate = net.with_parameters(theta)
    post = fit_last_layer_posterior(candidate, fit_data, loss, prior_precision, cfg.posterior)
    return lula_objective(candidate, post, in_batch, out_batch, cfg)


def finite_difference_gradient(net, aug, fit_data, in_batch, out_batch, loss, prior_precision, cfg, threads=THREADS):
    """Central differences of the objective over the free parameters only.

    Every coordinate uses the step 1e-4 * max(1, |theta_j|); coordinates may be
    evaluated in parallel and are combined in index order.
    """
    theta = flatten_parameters(net)
    free = aug.free_indices()

    def partial(j):
        step = FD_RELATIVE_STEP * max(1.0, abs(theta[j]))
        plus, minus = theta.copy(), theta.copy()
        plus[j] += step
        minus[j] -= step
        value_plus = _objective_at(net, plus, fit_data, in_batch, out_batch, loss, prior_precision, cfg)
        value_minus = _objective_at(net, minus, fit_data, in_batch, out_batch, loss, prior_precision, cfg)
        return (value_plus - value_minus) / (2.0 * step)

    grad = np.zeros_like(theta)
    if threads > 1 and len(free) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            grad[free] = list(executor.map(partial, free))
    else:
        grad[free] = [partial(j) for j in free]
    return grad


def analytic_gradient(net, aug, fit_data, in_batch, out_batch, loss, prior_precision):
    """Exact gradient of the objective for a diagonal last-layer posterior and linearized variances.

    With phibar = [h(L-1); 1], H = Lambda_fit^T phibar_fit^2 (k x (n + 1)) and S = 1 / (H + lambda),
    the total variance is nu(x) = phibar(x)^2 . s with s = sum_i S_i, so the objective is
    r . s with r = mean_in phibar^2 - mean_out phibar^2. The gradient reaches the
    features through r directly and through H, then flows back to the free blocks.
    """
    in_batch, out_batch = _features(in_batch), _features(out_batch)
    trace_fit = forward(net, _features(fit_data))
    trace_in = forward(net, in_batch)
    trace_out = forward(net, out_batch)
    phi_fit, phi_in, phi_out = trace_fit.features, trace_in.features, trace_out.features
    n = phi_fit.shape[1]

    def augmented_squares(phi):
        return np.hstack([phi, np.ones((len(phi), 1))]) ** 2

    hessian_diagonals = loss.output_hessian_diagonals(trace_fit.output)
    curvature = hessian_diagonals.T @ augmented_squares(phi_fit)
    precision = curvature + prior_precision
    if np.any(precision <= 0):
        raise NotPositiveDefinite('Diagonal precision is not positive definite.')
    inverse = 1.0 / precision
    column_sums = inverse.sum(axis=0)

    grad_in = (2.0 / len(phi_in)) * phi_in * column_sums[:n]
    grad_out = -(2.0 / len(phi_out)) * phi_out * column_sums[:n]
    r = augmented_squares(phi_in).mean(axis=0) - augmented_squares(phi_out).mean(axis=0)
    grad_curvature = -(inverse ** 2) * r
    grad_fit = 2.0 * phi_fit * (hessian_diagonals @ grad_curvature)[:, :n]

    total = backward_features(net, trace_in, grad_in)[0]
    total = total + backward_features(net, trace_out, grad_out)[0]
    total = total + backward_features(net, trace_fit, grad_fit)[0]
    return mask_gradient(total.flatten(), aug)


def _batches(m, size, rng):
    """Index batches of one shuffled pass over m points (a single full batch when size is None)."""
    if size is None or size >= m:
        return [np.arange(m)]
    order = rng.permutation(m)
    return [order[start:start + size] for start in range(0, m, size)]


def train_lula(net, aug, in_data, out_data, loss, prior_precision, cfg, fit_data=None):
    """Trains the free parameters of an augmented network.

    Each epoch refits the last-layer posterior at the current parameters and records
    the objective on the full inlier and outlier sets, then runs one pass of masked
    optimizer steps over the inlier batches (outlier batches are cycled alongside).
    Every objective evaluation refits the posterior, so gradients account for the
    dependence of the covariance on the free parameters.

    Args:
        net: the augmented Network
        aug: its LulaAugmentation
        in_data: the inliers (validation set)
        out_data: the outliers
        loss: the LossKind of the MAP network
        prior_precision: lambda of the last-layer posterior
        cfg: a LulaTrainConfig
        fit_data: the data of the Laplace curvature (defaults to in_data)

    Returns:
        A (trained Network, history, final LaplacePosterior) triple.

    Raises:
        A LulaTrainingFailed exception when a posterior refit is not positive definite
        or the objective becomes non-finite.
    """
    fit_data = in_data if fit_data is None else fit_data
    in_features, out_features = _features(in_data), _features(out_data)
    if not len(in_features) or not len(out_features):
        raise ValueError('Both the inlier and the outlier set must be non-empty.')
    if flatten_parameters(net).shape != aug.flat_mask().shape:
        raise ValueError('%s does not match %s.' % (net.log_desc, aug.log_desc))

    log_desc = '%s - LULA training %s' % (net.log_desc, aug.log_desc)
    rng = Rng(cfg.seed).derive('batches')
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate, cfg.momentum)
    free = aug.free_indices()
    theta = flatten_parameters(net)
    history = []
    start = time.time()

    def objective(params, in_batch, out_batch):
        try:
            value = _objective_at(net, params, fit_data, in_batch, out_batch, loss, prior_precision, cfg)
        except NotPositiveDefinite as err:
            raise LulaTrainingFailed('%s => posterior refit failed: %s [KO]' % (log_desc, err))
        if not np.isfinite(value):
            raise LulaTrainingFailed('%s => objective is not finite [KO]' % (log_desc,))
        return value

    for epoch in range(1, cfg.epochs + 1):
        history.append(objective(theta, in_features, out_features))
        out_batches = _batches(len(out_features), cfg.out_batch_size, rng)
        for step, in_index in enumerate(_batches(len(in_features), cfg.in_batch_size, rng)):
            in_batch = in_features[in_index]
            out_batch = out_features[out_batches[step % len(out_batches)]]
            current = net.with_parameters(theta)
            try:
                if cfg.gradient_method == 'analytic':
                    grad = analytic_gradient(current, aug, fit_data, in_batch, out_batch, loss, prior_precision)
                else:
                    grad = finite_difference_gradient(current, aug, fit_data, in_batch, out_batch, loss, prior_precision, cfg)
            except NotPositiveDefinite as err:
                raise LulaTrainingFailed('%s => posterior refit failed: %s [KO]' % (log_desc, err))
            if not np.all(np.isfinite(grad)):
                raise LulaTrainingFailed('%s => gradient is not finite at epoch %s [KO]' % (log_desc, epoch))
            theta = theta.copy()
            theta[free] -= optimizer.update(grad[free])
        logger.debug('%s => epoch %s/%s objective=%.6g' % (log_desc, epoch, cfg.epochs, history[-1]))

    trained = net.with_parameters(theta)
    try:
        post = fit_last_layer_posterior(trained, fit_data, loss, prior_precision, cfg.posterior)
    except NotPositiveDefinite as err:
        raise LulaTrainingFailed('%s => final posterior failed: %s [KO]' % (log_desc, err))

    logger.info('%s => %s epochs in %.3fs [OK]' % (log_desc, cfg.epochs, time.time() - start))
    return trained, history, post


@dataclass
class GridSearchResult:
    best_count: int
    scores: dict
    net: Network
    augmentation: LulaAugmentation
    posterior: object
    history: list

    def as_rows(self):
        return [{'units': m, 'score': score} for m, score in sorted(self.scores.items())]


def select_best(scores):
    """Count with the smallest score; ties go to the smaller count, None scores are ignored."""
    best = None
    for count in sorted(scores):
        score = scores[count]
        if score is None:
            continue
        if best is None or score < scores[best]:
            best = count
    return best


def mmc_score(in_probabilities, out_probabilities, n_classes):
    """|1 - MMC_in| + |1/k - MMC_out|."""
    return abs(1.0 - mmc(in_probabilities)) + abs(1.0 / n_classes - mmc(out_probabilities))


def grid_search_units(net, candidate_counts, in_val, out_val, loss, prior_precision, cfg, n_classes=None, fit_data=None, init_std=None, predict_cfg=None):
    """Trains LULA for every candidate unit count and keeps the best by validation MMCs.

    Units are added to the last hidden layer. Each candidate is scored with
    |1 - MMC_in(m)| + |1/k - MMC_out(m)| under the predictive of its final posterior.

    Returns:
        A GridSearchResult holding the best count, every score (None for skipped
        candidates) and the trained network, augmentation and posterior of the best.

    Raises:
        A LulaTrainingFailed exception when every candidate fails.
    """
    if not loss.is_classification:
        raise ImproperlyConfigured('The unit grid search scores classification confidences.')
    candidates = sorted(set(int(m) for m in candidate_counts))
    if not candidates:
        raise ImproperlyConfigured('The candidate unit counts are empty.')
    if any(m < 0 for m in candidates):
        raise ImproperlyConfigured('Unit counts cannot be negative, got %s.' % (candidates,))
    if n_classes is None:
        n_classes = loss.n_classes(net.output_dim)
    if predict_cfg is None:
        predict_cfg = laplace.PredictConfig('mc', samples=cfg.samples, seed=cfg.seed)

    log_desc = '%s - LULA unit grid search %s' % (net.log_desc, candidates)
    root = Rng(cfg.seed)
    scores, trained = {}, {}
    for count in candidates:
        augmented, aug = augment(net, penultimate_counts(net, count), root.derive('units', count), init_std)
        try:
            result, history, post = train_lula(augmented, aug, in_val, out_val, loss, prior_precision, cfg, fit_data)
        except LulaTrainingFailed as err:
            logger.append_msg('%s units skipped: %s' % (count, err))
            scores[count] = None
            continue
        in_probabilities = laplace.predict(result, post, _features(in_val), predict_cfg)
        out_probabilities = laplace.predict(result, post, _features(out_val), predict_cfg)
        scores[count] = mmc_score(in_probabilities, out_probabilities, n_classes)
        trained[count] = (result, aug, post, history)
        logger.debug('%s => %s units score=%.6g' % (log_desc, count, scores[count]))

    if logger.messages:
        logger.log_messages(lvl=logging.WARNING, start='%s => skipped candidates:\n' % (log_desc,))

    best = select_best(scores)
    if best is None:
        raise LulaTrainingFailed('%s => every candidate failed [KO]' % (log_desc,))
    logger.info('%s => %s units (score %.6g) [OK]' % (log_desc, best, scores[best]))
    result, aug, post, history = trained[best]
    return GridSearchResult(best, scores, result, aug, post, history)


def augmentation_to_element(aug):
    root = etree.Element('lula_augmentation', format=AUGMENTATION_FORMAT, version=AUGMENTATION_VERSION)
    XMLHelper.sub(root, 'original_dims', ' '.join(str(d) for d in aug.original_dims))
    XMLHelper.sub(root, 'unit_counts', ' '.join(str(m) for m in aug.unit_counts))
    XMLHelper.sub(root, 'init_std', ' '.join('%.17g' % s for s in aug.init_std))
    for index, (weight_mask, bias_mask) in enumerate(aug.masks, start=1):
        elem = XMLHelper.sub(root, 'layer', index=index)
        XMLHelper.sub(elem, 'weight_mask', serialize_mask(weight_mask), rows=weight_mask.shape[0], cols=weight_mask.shape[1])
        XMLHelper.sub(elem, 'bias_mask', serialize_mask(bias_mask), size=bias_mask.size)
    return root


def augmentation_from_element(root):
    """Rebuilds a LulaAugmentation from its XML element.

    Raises:
        A DeserializationFailed exception for malformed documents.
    """
    if root.tag != 'lula_augmentation' or root.get('format') != AUGMENTATION_FORMAT:
        raise DeserializationFailed('Not a %s document (root <%s>).' % (AUGMENTATION_FORMAT, root.tag))
    if root.get('version') != AUGMENTATION_VERSION:
        raise DeserializationFailed('Unsupported augmentation version %r.' % (root.get('version'),))
    try:
        original_dims = tuple(int(d) for d in XMLHelper.get_text(root, 'original_dims').split())
        unit_counts = tuple(int(m) for m in XMLHelper.get_text(root, 'unit_counts').split())
        init_std = tuple(float(s) for s in XMLHelper.get_text(root, 'init_std').split())
        masks = []
        for elem in XMLHelper.get_elements('layer', root):
            weight_elem = XMLHelper.get_element(elem, 'weight_mask')
            bias_elem = XMLHelper.get_element(elem, 'bias_mask')
            shape = (XMLHelper.get_attr(weight_elem, 'rows', int), XMLHelper.get_attr(weight_elem, 'cols', int))
            masks.append((
                deserialize_mask(weight_elem.text, shape),
                deserialize_mask(bias_elem.text, (XMLHelper.get_attr(bias_elem, 'size', int),)),
            ))
    except (ElementNotFound, ValueError) as err:
        raise DeserializationFailed('Malformed augmentation file: %s' % (err,))
    if len(unit_counts) != len(original_dims) - 2 or len(masks) != len(original_dims) - 1:
        raise DeserializationFailed('Unit counts and masks do not match the original dims %s.' % (original_dims,))
    return LulaAugmentation(unit_counts=unit_counts, masks=masks, init_std=init_std, original_dims=original_dims)


def save_augmentation(aug, path):
    XMLHelper.write(augmentation_to_element(aug), path)


def load_augmentation(path):
    """Reads an augmentation file written by save_augmentation.

    Raises:
        A DeserializationFailed exception for malformed files.
    """
    try:
        root = XMLHelper.read(path)
    except etree.XMLSyntaxError as err:
        raise DeserializationFailed('Malformed augmentation file %s: %s' % (path, err))
    return augmentation_from_element(root)
