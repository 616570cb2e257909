"""Laplace approximations: GGN curvature, Gaussian posteriors and predictive distributions.

Curvature is the generalized Gauss-Newton (GGN) matrix sum_x J_x^T Lambda_x J_x, with
J_x the output Jacobian and Lambda_x the output-space Hessian of the negative
log-likelihood. The posterior is N(theta_MAP, (H + lambda I)^-1).

Parameter subsets:
    all_layers: the whole flattened theta (network flattening contract).
    last_layer: the last layer slice of theta, i.e. W^(L) row-major then b^(L).

Kronecker factors work on the bias-augmented last layer Wbar = [W, b] (k x (n + 1))
and its row-major vectorization, where the data-term GGN is approximated by
kron(G, A) with G = sum_x Lambda_x (k x k) and A = mean_x hbar hbar^T
((n + 1) x (n + 1), hbar = [h^(L-1); 1]). Conversions between the augmented
order and the flattening contract are internal to this module.
"""
# Python stdlib
from dataclasses import dataclass

# Third-party
import numpy as np
import scipy.linalg
from scipy.special import expit, softmax

# Internal
from . import metrics
from .log import default_logger as logger
from .network import forward, output_jacobians, flatten_parameters
from .numerics import cholesky, solve_psd, sample_gaussian, NotPositiveDefinite, Rng
from .settings import FULL_GGN_MAX_PARAMS, JITTER_STEPS
from .utils import ImproperlyConfigured

CURVATURE_KINDS = ('full_ggn', 'diag_ggn', 'kfac_last_layer')
SUBSETS = ('all_layers', 'last_layer')
DAMPINGS = ('exact', 'factor')
PREDICT_METHODS = ('mc', 'probit_linearized')
TUNING_OBJECTIVES = ('val_log_likelihood', 'ood_mmc')

DEFAULT_PRIOR_GRID = tuple(np.logspace(-4, 4, 17))
JACOBIAN_BATCH = 256


class CurvatureCapExceeded(Exception):
    pass


class TuningFailed(Exception):
    pass


def _augmented_order(k, n):
    """Index array p so that theta_last[p] is the row-major vec of Wbar = [W, b]."""
    order = np.empty(k * (n + 1), dtype=np.int64)
    for i in range(k):
        order[i * (n + 1):i * (n + 1) + n] = np.arange(i * n, (i + 1) * n)
        order[i * (n + 1) + n] = k * n + i
    return order


def _augment(features):
    return np.hstack([features, np.ones((len(features), 1))])


def last_layer_jacobians(features, k):
    """Jacobians (m x k x k(n+1)) of the outputs w.r.t. the last layer, flattening contract order."""
    m, n = features.shape
    jacobians = np.zeros((m, k, k * (n + 1)))
    for i in range(k):
        jacobians[:, i, i * n:(i + 1) * n] = features
        jacobians[:, i, k * n + i] = 1.0
    return jacobians


def subset_mean(net, subset):
    """theta_MAP restricted to the subset."""
    theta = flatten_parameters(net)
    if subset == 'last_layer':
        return theta[net.last_layer_slice()]
    return theta


def subset_jacobians(net, x, subset):
    """Per-input output Jacobians restricted to the subset (m x k x p)."""
    if subset == 'last_layer':
        trace = forward(net, x)
        return last_layer_jacobians(trace.features, net.output_dim)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    return np.concatenate([output_jacobians(net, x[start:start + JACOBIAN_BATCH]) for start in range(0, len(x), JACOBIAN_BATCH)])


@dataclass
class Curvature:
    """Data term of the posterior precision for a parameter subset.

    Exactly one representation is set: matrix (full_ggn), diagonal (diag_ggn),
    or the factor pair G, A (kfac_last_layer).
    """
    kind: str
    subset: str
    loss: object
    n_outputs: int
    n_features: int
    n_data: int
    matrix: np.ndarray = None
    diagonal: np.ndarray = None
    G: np.ndarray = None
    A: np.ndarray = None

    @property
    def size(self):
        if self.matrix is not None:
            return self.matrix.shape[0]
        if self.diagonal is not None:
            return self.diagonal.size
        return self.G.shape[0] * self.A.shape[0]

    def dense(self):
        """Dense data-term curvature in the flattening contract order."""
        if self.matrix is not None:
            return self.matrix
        if self.diagonal is not None:
            return np.diag(self.diagonal)
        order = _augmented_order(self.n_outputs, self.n_features)
        dense = np.empty((self.size, self.size))
        dense[np.ix_(order, order)] = np.kron(self.G, self.A)
        return dense


def fit_curvature(net, data, loss, kind='diag_ggn', subset='last_layer', max_params=FULL_GGN_MAX_PARAMS):
    """Computes the GGN data-term curvature of net on data.

    Args:
        net: a MAP-trained Network
        data: a Dataset (only the features are used: the GGN does not depend on targets)
        loss: the LossKind defining Lambda_x
        kind: full_ggn, diag_ggn or kfac_last_layer
        subset: all_layers or last_layer (kfac requires last_layer)
        max_params: full_ggn is refused above this subset size

    Returns:
        A Curvature.

    Raises:
        A CurvatureCapExceeded exception when full_ggn exceeds max_params.
        A ValueError for empty data or an invalid kind/subset combination.
    """
    if kind not in CURVATURE_KINDS:
        raise ValueError('Unknown curvature kind %r, expected one of %s.' % (kind, ', '.join(CURVATURE_KINDS)))
    if subset not in SUBSETS:
        raise ValueError('Unknown subset %r, expected one of %s.' % (subset, ', '.join(SUBSETS)))
    if kind == 'kfac_last_layer' and subset != 'last_layer':
        raise ValueError('Kronecker factors are only available for the last layer.')
    features = data.features if hasattr(data, 'features') else np.asarray(data, dtype=np.float64)
    if not len(features):
        raise ValueError('Cannot fit curvature on an empty dataset.')
    loss.check_output_dim(net.output_dim)

    k = net.output_dim
    size = net.layers[-1].spec.parameter_count if subset == 'last_layer' else net.parameter_count
    if kind == 'full_ggn' and size > max_params:
        raise CurvatureCapExceeded('%s - full_ggn over %s parameters exceeds the cap of %s.' % (net.log_desc, size, max_params))

    trace = forward(net, features)
    phi = trace.features
    curvature = Curvature(kind=kind, subset=subset, loss=loss, n_outputs=k, n_features=phi.shape[1], n_data=len(features))

    if subset == 'last_layer' and kind == 'kfac_last_layer':
        phibar = _augment(phi)
        curvature.A = phibar.T @ phibar / len(phibar)
        curvature.G = loss.output_hessians(trace.output).sum(axis=0)
    elif subset == 'last_layer' and kind == 'diag_ggn':
        # diag(J^T Lambda J) only involves the diagonal of Lambda.
        augmented = loss.output_hessian_diagonals(trace.output).T @ (_augment(phi) ** 2)
        n = phi.shape[1]
        curvature.diagonal = np.concatenate([augmented[:, :n].ravel(), augmented[:, n]])
    else:
        hessians = loss.output_hessians(trace.output)
        total = np.zeros((size, size)) if kind == 'full_ggn' else np.zeros(size)
        for start in range(0, len(features), JACOBIAN_BATCH):
            stop = start + JACOBIAN_BATCH
            if subset == 'last_layer':
                jacobians = last_layer_jacobians(phi[start:stop], k)
            else:
                jacobians = output_jacobians(net, features[start:stop])
            weighted = np.einsum('bkl,bld->bkd', hessians[start:stop], jacobians)
            if kind == 'full_ggn':
                total += np.einsum('bkp,bkq->pq', jacobians, weighted)
            else:
                total += np.einsum('bkp,bkp->p', jacobians, weighted)
        if kind == 'full_ggn':
            curvature.matrix = 0.5 * (total + total.T)
        else:
            curvature.diagonal = total

    logger.debug('%s - Curvature %s/%s on %s points => %s parameters [OK]' % (net.log_desc, kind, subset, len(features), curvature.size))
    return curvature


def _jittered_positive(values, what):
    """Returns values, jittered per the Cholesky policy, once they are all positive."""
    mean = float(np.mean(values))
    for jitter in [0.0] + [j * mean for j in JITTER_STEPS if mean > 0]:
        if np.all(values + jitter > 0):
            return values + jitter
    raise NotPositiveDefinite('%s precision is not positive definite.' % (what,))


class LaplacePosterior(object):
    """Gaussian N(mean, Sigma) over a parameter subset with Sigma = (H + lambda I)^-1.

    Built by build_posterior; immutable afterwards. Vectors are in the flattening
    contract order of the subset.
    """

    def __init__(self, curvature, mean, prior_precision, damping='exact'):
        if prior_precision < 0:
            raise ValueError('The prior precision cannot be negative, got %s.' % (prior_precision,))
        if damping not in DAMPINGS:
            raise ValueError('Unknown damping %r, expected one of %s.' % (damping, ', '.join(DAMPINGS)))
        mean = np.array(mean, dtype=np.float64)
        if mean.shape != (curvature.size,):
            raise ValueError('Mean of shape %s does not match a curvature of size %s.' % (mean.shape, curvature.size))
        mean.setflags(write=False)

        self.curvature = curvature
        self.mean = mean
        self.prior_precision = float(prior_precision)
        self.damping = damping
        self._chol_cov = None
        self._factorize()

    @property
    def kind(self):
        return self.curvature.kind

    @property
    def subset(self):
        return self.curvature.subset

    @property
    def loss(self):
        return self.curvature.loss

    @property
    def size(self):
        return self.mean.size

    def __repr__(self):
        return '<LaplacePosterior: %s/%s lambda=%g size=%s>' % (self.kind, self.subset, self.prior_precision, self.size)

    def _factorize(self):
        curvature, lam = self.curvature, self.prior_precision
        if curvature.matrix is not None:
            self.precision = curvature.matrix + lam * np.eye(curvature.size)
            self.chol_precision = cholesky(self.precision)
        elif curvature.diagonal is not None:
            self.precision_diagonal = _jittered_positive(curvature.diagonal + lam, 'Diagonal')
        else:
            k, n = curvature.n_outputs, curvature.n_features
            self.order = _augmented_order(k, n)
            if self.damping == 'exact':
                g_values, self.g_vectors = np.linalg.eigh(curvature.G)
                a_values, self.a_vectors = np.linalg.eigh(curvature.A)
                # eigh can return tiny negative values for PSD factors.
                eigen = np.outer(np.maximum(g_values, 0.0), np.maximum(a_values, 0.0)) + lam
                self.eigen_precision = _jittered_positive(eigen, 'Kronecker')
            else:
                root = np.sqrt(lam)
                self.chol_g = cholesky(curvature.G + root * np.eye(k))
                self.chol_a = cholesky(curvature.A + root * np.eye(n + 1))

    def _to_matrices(self, vectors):
        """Contract-order vectors (..., p) -> augmented matrices (..., k, n + 1)."""
        k, n = self.curvature.n_outputs, self.curvature.n_features
        return vectors[..., self.order].reshape(vectors.shape[:-1] + (k, n + 1))

    def _from_matrices(self, matrices):
        k, n = self.curvature.n_outputs, self.curvature.n_features
        flat = matrices.reshape(matrices.shape[:-2] + (k * (n + 1),))
        vectors = np.empty_like(flat)
        vectors[..., self.order] = flat
        return vectors

    def _factor_inverses(self):
        eye_g = np.eye(self.chol_g.shape[0])
        eye_a = np.eye(self.chol_a.shape[0])
        return solve_psd(None, eye_g, chol=self.chol_g), solve_psd(None, eye_a, chol=self.chol_a)

    def covariance(self):
        """Dense Sigma (only sensible for small subsets)."""
        if self.curvature.matrix is not None:
            return solve_psd(self.precision, np.eye(self.size), chol=self.chol_precision)
        if self.curvature.diagonal is not None:
            return np.diag(1.0 / self.precision_diagonal)
        if self.damping == 'exact':
            basis = np.kron(self.g_vectors, self.a_vectors)
            augmented = (basis / self.eigen_precision.ravel()[None, :]) @ basis.T
        else:
            g_inverse, a_inverse = self._factor_inverses()
            augmented = np.kron(g_inverse, a_inverse)
        covariance = np.empty_like(augmented)
        covariance[np.ix_(self.order, self.order)] = augmented
        return covariance

    def marginal_variances(self):
        if self.curvature.diagonal is not None:
            return 1.0 / self.precision_diagonal
        if self.curvature.matrix is None and self.damping == 'exact':
            squares = np.kron(self.g_vectors ** 2, self.a_vectors ** 2)
            return self._from_matrices((squares @ (1.0 / self.eigen_precision.ravel())).reshape(self.eigen_precision.shape))
        return np.diag(self.covariance()).copy()

    def quadratic_forms(self, g):
        """g^T Sigma g for every vector in the trailing axis of g."""
        g = np.asarray(g, dtype=np.float64)
        if g.shape[-1] != self.size:
            raise ValueError('Vectors of size %s do not match a posterior of size %s.' % (g.shape[-1], self.size))
        if self.curvature.diagonal is not None:
            return np.sum(g * g / self.precision_diagonal, axis=-1)
        if self.curvature.matrix is not None:
            flat = g.reshape(-1, self.size)
            solved = solve_psd(self.precision, flat.T, chol=self.chol_precision)
            return np.sum(flat * solved.T, axis=-1).reshape(g.shape[:-1])
        gamma = self._to_matrices(g)
        if self.damping == 'exact':
            rotated = np.einsum('ia,...ij,jb->...ab', self.g_vectors, gamma, self.a_vectors)
            return np.sum(rotated ** 2 / self.eigen_precision, axis=(-2, -1))
        g_inverse, a_inverse = self._factor_inverses()
        return np.einsum('...ij,...ij->...', g_inverse @ gamma, gamma @ a_inverse)

    def sample(self, rng, count):
        """Draws count parameter vectors (count x p).

        Kronecker posteriors use the matrix-normal identity: with Sigma = U U^T (x) V V^T,
        Wbar = mean + U Z V^T for Z standard normal. Exact damping takes U, V from the
        eigenbases (scaled per eigenvalue pair), factor damping from the inverse
        Cholesky factors of G + sqrt(lambda) I and A + sqrt(lambda) I.
        """
        count = int(count)
        if self.curvature.matrix is not None:
            if self._chol_cov is None:
                self._chol_cov = cholesky(self.covariance())
            return sample_gaussian(self.mean, self._chol_cov, rng, count)
        if self.curvature.diagonal is not None:
            z = rng.standard_normal((count, self.size))
            return self.mean[None, :] + z / np.sqrt(self.precision_diagonal)[None, :]

        k, n = self.curvature.n_outputs, self.curvature.n_features
        z = rng.standard_normal((count, k, n + 1))
        if self.damping == 'exact':
            noise = self.g_vectors @ (z / np.sqrt(self.eigen_precision)) @ self.a_vectors.T
        else:
            left = scipy.linalg.solve_triangular(self.chol_g, np.eye(k), lower=True, trans='T')
            right = scipy.linalg.solve_triangular(self.chol_a, np.eye(n + 1), lower=True, trans='T')
            noise = left @ z @ right.T
        return self.mean[None, :] + self._from_matrices(noise)


def build_posterior(curvature, mean, prior_precision, damping='exact'):
    """Builds N(mean, (H + lambda I)^-1) from a data-term curvature.

    Raises:
        A NotPositiveDefinite exception when the precision is singular after jitter.
    """
    return LaplacePosterior(curvature, mean, prior_precision, damping)


def fit_laplace(net, data, loss, kind='diag_ggn', subset='last_layer', prior_precision=1.0, damping='exact'):
    """fit_curvature followed by build_posterior around the parameters of net."""
    curvature = fit_curvature(net, data, loss, kind, subset)
    return build_posterior(curvature, subset_mean(net, subset), prior_precision, damping)


def sample_params(post, rng, count):
    """Draws count samples theta_s ~ N(theta_MAP, Sigma) of the posterior subset."""
    return post.sample(rng, count)


def linearized_variances(net, post, x):
    """Per-input, per-output linearized variances g_i^T Sigma g_i (m x k)."""
    return post.quadratic_forms(subset_jacobians(net, x, post.subset))


def linearized_variance(net, post, x):
    """Linearized output variance vector v(x) (size k) of a single input."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError('A single input vector is required, got shape %s.' % (x.shape,))
    return linearized_variances(net, post, x[None, :])[0]


def probit_predict_binary(f_map, v):
    """p(y = 1 | x) ~ sigmoid(f_map / sqrt(1 + pi/8 v)).

    Raises:
        A ValueError for a negative variance.
    """
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError('The variance cannot be negative.')
    result = expit(np.asarray(f_map, dtype=np.float64) / np.sqrt(1.0 + np.pi / 8.0 * v))
    return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class PredictConfig:
    method: str = 'mc'
    samples: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.method not in PREDICT_METHODS:
            raise ImproperlyConfigured('Unknown prediction method %r, expected one of %s.' % (self.method, ', '.join(PREDICT_METHODS)))
        if self.method == 'mc' and self.samples < 1:
            raise ImproperlyConfigured('At least one sample is needed, got %s.' % (self.samples,))


@dataclass
class RegressionPrediction:
    """Predictive mean with epistemic (parameter) and total (epistemic + 1/beta) variances."""
    mean: np.ndarray
    epistemic_variance: np.ndarray
    total_variance: np.ndarray

    def variance(self, include_aleatoric=True):
        return self.total_variance if include_aleatoric else self.epistemic_variance


def sampled_outputs(net, post, x, samples):
    """Network outputs under each parameter sample (S x m x k)."""
    if post.subset == 'last_layer':
        phi = forward(net, x).features
        k, n = net.output_dim, phi.shape[1]
        weights = samples[:, :k * n].reshape(len(samples), k, n)
        biases = samples[:, k * n:]
        return np.einsum('mn,skn->smk', phi, weights) + biases[:, None, :]
    return np.stack([forward(net.with_parameters(theta), x).output for theta in samples])


def _class_probabilities(outputs, loss):
    """Class probabilities from outputs (... x k); binary logits give two columns."""
    if loss.name == 'binary':
        p = expit(outputs[..., 0])
        return np.stack([1.0 - p, p], axis=-1)
    return softmax(outputs, axis=-1)


def mc_predict(net, post, x, cfg=PredictConfig()):
    """Monte-Carlo predictive distribution.

    Classification: (1/S) sum_s softmax(f(x; theta_s)) as an m x C array (C = 2 for binary).
    Regression: a RegressionPrediction with the sample mean, the sample variance
    (epistemic) and the sample variance plus 1/beta (total).
    """
    if cfg.samples < 1:
        raise ImproperlyConfigured('At least one sample is needed.')
    samples = sample_params(post, Rng(cfg.seed), cfg.samples)
    outputs = sampled_outputs(net, post, x, samples)
    if post.loss.is_classification:
        return _class_probabilities(outputs, post.loss).mean(axis=0)

    mean = outputs.mean(axis=0)
    epistemic = np.mean(outputs ** 2, axis=0) - mean ** 2
    epistemic = np.maximum(epistemic, 0.0)
    return RegressionPrediction(mean, epistemic, epistemic + 1.0 / post.loss.noise_precision)


def linearized_predict(net, post, x):
    """Closed-form predictive: probit for a binary logit, Gaussian for regression."""
    loss = post.loss
    output = forward(net, x).output
    variances = linearized_variances(net, post, x)
    if loss.name == 'binary':
        p = probit_predict_binary(output[:, 0], variances[:, 0])
        return np.stack([1.0 - p, p], axis=-1)
    if loss.name == 'gaussian':
        return RegressionPrediction(output, variances, variances + 1.0 / loss.noise_precision)
    raise ImproperlyConfigured('The linearized probit predictive is only available for binary and regression models.')


def predict(net, post, x, cfg=PredictConfig()):
    """Predictive distribution with the method of cfg (mc or probit_linearized)."""
    if cfg.method == 'mc':
        return mc_predict(net, post, x, cfg)
    return linearized_predict(net, post, x)


def map_predict(net, loss, x):
    """Predictive of the MAP network alone (no parameter uncertainty)."""
    output = forward(net, x).output
    if loss.is_classification:
        return _class_probabilities(output, loss)
    zeros = np.zeros_like(output)
    return RegressionPrediction(output, zeros, zeros + 1.0 / loss.noise_precision)


def validation_log_likelihood(prediction, data, loss):
    """Mean log predictive density of the validation targets."""
    if loss.is_classification:
        return metrics.classification_log_likelihood(prediction, data.targets)
    return metrics.gaussian_log_likelihood(prediction.mean, prediction.total_variance, data.targets)


def mmc_distance(in_probabilities, out_probabilities):
    """|1 - MMC_in| + |1/C - MMC_out|, zero for perfect in/out confidences."""
    n_classes = in_probabilities.shape[1]
    return abs(1.0 - metrics.mmc(in_probabilities)) + abs(1.0 / n_classes - metrics.mmc(out_probabilities))


@dataclass
class TuningResult:
    prior_precision: float
    objective: str
    scores: list

    def as_rows(self):
        return [{'prior_precision': lam, 'score': score} for lam, score in self.scores]


def tune_prior_precision(net, curvature, val_data, objective='val_log_likelihood', grid=DEFAULT_PRIOR_GRID, cfg=PredictConfig(), out_data=None, damping='exact'):
    """Chooses the prior precision on a grid.

    val_log_likelihood maximizes the validation log-likelihood; ood_mmc minimizes
    |1 - MMC_in| + |1/C - MMC_out| on (val_data, out_data). Every candidate uses the same
    prediction seed. Ties keep the first candidate of the grid.

    Args:
        net: the MAP Network
        curvature: the fitted data-term Curvature (template for every candidate)
        val_data: the validation Dataset
        objective: val_log_likelihood or ood_mmc
        grid: candidate prior precisions
        cfg: the PredictConfig used for every candidate
        out_data: the outlier Dataset (ood_mmc only)

    Returns:
        A TuningResult; scores is None for candidates whose posterior is not PD.

    Raises:
        A TuningFailed exception when every candidate fails.
    """
    if objective not in TUNING_OBJECTIVES:
        raise ImproperlyConfigured('Unknown tuning objective %r, expected one of %s.' % (objective, ', '.join(TUNING_OBJECTIVES)))
    if objective == 'ood_mmc' and (out_data is None or not curvature.loss.is_classification):
        raise ImproperlyConfigured('The ood_mmc objective needs a classification model and outlier data.')
    grid = [float(lam) for lam in grid]
    if not grid:
        raise ImproperlyConfigured('The prior precision grid is empty.')

    log_desc = '%s - Prior precision tuning (%s, %s candidates)' % (net.log_desc, objective, len(grid))
    mean = subset_mean(net, curvature.subset)
    scores, best, best_score = [], None, None
    for lam in grid:
        try:
            post = build_posterior(curvature, mean, lam, damping)
        except NotPositiveDefinite as err:
            logger.warning('%s => lambda=%g skipped: %s' % (log_desc, lam, err))
            scores.append((lam, None))
            continue

        if objective == 'val_log_likelihood':
            score = validation_log_likelihood(predict(net, post, val_data.features, cfg), val_data, curvature.loss)
            better = best_score is None or score > best_score
        else:
            score = mmc_distance(predict(net, post, val_data.features, cfg), predict(net, post, out_data.features, cfg))
            better = best_score is None or score < best_score
        scores.append((lam, score))
        if better:
            best, best_score = lam, score

    if best is None:
        raise TuningFailed('%s => no candidate gives a positive definite posterior [KO]' % (log_desc,))

    logger.info('%s => lambda=%g (score %.6g) [OK]' % (log_desc, best, best_score))
    return TuningResult(best, objective, scores)
