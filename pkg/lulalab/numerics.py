"""Dense linear algebra, Kronecker utilities and seeded sampling.

Matrices are C-ordered float64 numpy arrays. ``vec`` is the column-major
(Fortran order) stacking of columns, so that::

    kron(A, B) @ vec(X) == vec(B @ X @ A.T)
"""
# Python stdlib
import zlib

# Third-party
import numpy as np
import scipy.linalg

# Internal
from .settings import JITTER_STEPS

SYMMETRY_TOLERANCE = 1e-10


class NotPositiveDefinite(Exception):
    pass


class Rng(object):
    """Seeded random stream on the Philox 4x64 counter-based generator.

    The Philox key is the seed itself, so a seed identifies the stream on every
    platform. A Rng must be used by one thread at a time: parallel work uses
    derive() to get independent streams.
    """
    algorithm = 'philox4x64'

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ValueError('A seed must be a 64-bit unsigned integer, got %s.' % (seed,))
        self.seed = seed
        self.generator = np.random.Generator(np.random.Philox(key=seed))

    def __repr__(self):
        return '<Rng: %s seed=%s>' % (self.algorithm, self.seed)

    def derive(self, *labels):
        """Returns a new independent Rng identified by this seed and the labels.

        Labels are ints or strings; the derived seed does not depend on how much
        of this stream was consumed.
        """
        entropy = [self.seed] + [_label_to_int(label) for label in labels]
        state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
        return Rng(int(state[0]))

    def clone(self):
        """Returns a fresh Rng replaying this stream from its start."""
        return Rng(self.seed)

    def standard_normal(self, size):
        return self.generator.standard_normal(size)

    def uniform(self, low, high, size):
        return self.generator.uniform(low, high, size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def permuted(self, x, axis):
        """Copy of x with every slice along axis shuffled independently."""
        return self.generator.permuted(x, axis=axis)

    def integers(self, high, size=None):
        return self.generator.integers(0, high, size=size)


def _label_to_int(label):
    if isinstance(label, str):
        return zlib.crc32(label.encode('utf-8'))
    return int(label)


def as_matrix(a):
    """Returns a C-ordered float64 2D copy of a."""
    m = np.array(a, dtype=np.float64, order='C')
    if m.ndim != 2:
        raise ValueError('A matrix must be 2-dimensional, got shape %s.' % (m.shape,))
    return m


def check_symmetric(a, tolerance=SYMMETRY_TOLERANCE):
    """Raises a ValueError unless a is square and symmetric within tolerance (relative)."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError('A square matrix is required, got shape %s.' % (a.shape,))
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > tolerance * scale:
        raise ValueError('The matrix is not symmetric.')


def cholesky(a, jitter_steps=JITTER_STEPS):
    """Lower Cholesky factor L of a symmetric matrix, a = L @ L.T.

    The factorization is first attempted on a itself. If it fails, each jitter
    step j adds j * mean(diag(a)) * I and retries. The default steps are 1e-8
    then 1e-6.

    Args:
        a: a symmetric matrix
        jitter_steps: relative jitters tried in order after the plain attempt

    Returns:
        The lower-triangular factor as a C-ordered float64 array.

    Raises:
        A ValueError if a is not square and symmetric.
        A NotPositiveDefinite exception if every attempt fails.
    """
    a = as_matrix(a)
    check_symmetric(a)
    if not np.all(np.isfinite(a)):
        raise NotPositiveDefinite('The matrix has non-finite entries.')

    mean_diag = float(np.mean(np.diag(a))) if a.size else 0.0
    attempts = [0.0] + [j * mean_diag for j in jitter_steps if mean_diag > 0]
    for jitter in attempts:
        try:
            return np.ascontiguousarray(scipy.linalg.cholesky(a + jitter * np.eye(a.shape[0]), lower=True))
        except scipy.linalg.LinAlgError:
            continue

    raise NotPositiveDefinite('Cholesky factorization failed after %s attempts (mean diagonal %.3g).' % (len(attempts), mean_diag))


def solve_psd(a, b, chol=None):
    """Solves a @ x = b for a symmetric positive definite a.

    Args:
        a: the symmetric PD matrix
        b: a vector or a matrix of right-hand sides
        chol: the lower Cholesky factor of a when already known

    Raises:
        A NotPositiveDefinite exception propagated from cholesky.
    """
    if chol is None:
        chol = cholesky(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != chol.shape[0]:
        raise ValueError('Dimension mismatch: matrix %s, right-hand side %s.' % (chol.shape, b.shape))
    return scipy.linalg.cho_solve((chol, True), b)


def kron(a, b):
    """Kronecker product: entry [i*b.rows + k, j*b.cols + l] = a[i, j] * b[k, l]."""
    return np.kron(as_matrix(a), as_matrix(b))


def vec(x):
    """Column-major stacking of the columns of x."""
    return np.asarray(x, dtype=np.float64).ravel(order='F')


def unvec(v, rows, cols):
    """Inverse of vec."""
    return np.asarray(v, dtype=np.float64).reshape((rows, cols), order='F')


def sample_gaussian(mean, chol_cov, rng, count):
    """Draws samples mean + chol_cov @ z with z standard normal.

    Args:
        mean: vector of size d
        chol_cov: d x d lower-triangular factor of the covariance
        rng: a Rng
        count: number of samples

    Returns:
        A count x d array, one sample per row.
    """
    mean = np.asarray(mean, dtype=np.float64)
    chol_cov = as_matrix(chol_cov)
    if chol_cov.shape != (mean.size, mean.size):
        raise ValueError('Dimension mismatch: mean %s, covariance factor %s.' % (mean.shape, chol_cov.shape))

    z = rng.standard_normal((int(count), mean.size))
    return mean[None, :] + z @ chol_cov.T
