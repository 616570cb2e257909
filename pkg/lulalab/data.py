"""Datasets: synthetic generators, OOD synthesis, CSV ingestion, splits and standardization.

Every generator is a pure function of its parameters and seed.
"""
# Python stdlib
from dataclasses import dataclass, field, replace

# Third-party
import numpy as np
import pandas as pd
from scipy.ndimage import uniform_filter1d
from sklearn.datasets import make_moons
from sklearn.preprocessing import StandardScaler

# Internal
from .log import default_logger as logger
from .numerics import Rng
from .utils import ImproperlyConfigured

ROLES = ('train', 'val', 'test', 'in', 'out')
TASKS = ('regression', 'classification')
OOD_KINDS = ('permute', 'blur', 'contrast', 'mixed')


class DataFormatError(Exception):
    pass


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray


@dataclass
class Dataset:
    """Feature matrix plus targets.

    targets is an m x k float matrix for regression, an integer label vector for
    classification, and None for unlabeled (e.g. OOD) sets.
    """
    features: np.ndarray
    targets: np.ndarray = None
    role: str = 'train'
    task: str = None
    name: str = 'data'
    stats: StandardizationStats = None
    target_stats: StandardizationStats = None

    def __post_init__(self):
        self.features = np.array(self.features, dtype=np.float64, order='C')
        if self.features.ndim != 2:
            raise ValueError('Features must be an m x n matrix, got shape %s.' % (self.features.shape,))
        if self.role not in ROLES:
            raise ValueError('Unknown role %r, expected one of %s.' % (self.role, ', '.join(ROLES)))
        if self.targets is None:
            return
        if self.task not in TASKS:
            raise ValueError('A labeled dataset needs a task among %s.' % (', '.join(TASKS),))
        if self.task == 'regression':
            targets = np.array(self.targets, dtype=np.float64)
            self.targets = targets.reshape(len(targets), -1)
        else:
            labels = np.asarray(self.targets)
            if labels.size and (np.any(labels < 0) or np.any(labels != np.round(labels))):
                raise ValueError('Labels must be non-negative integers.')
            self.targets = labels.astype(np.int64).ravel()
        if len(self.targets) != len(self.features):
            raise ValueError('Row counts differ: %s features, %s targets.' % (len(self.features), len(self.targets)))

    def __len__(self):
        return len(self.features)

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        if self.task != 'classification' or not len(self.targets):
            return None
        return int(self.targets.max()) + 1

    @property
    def log_desc(self):
        return '<Dataset %s (%s, %s x %s)>' % (self.name, self.role, len(self), self.n_features)

    def subset(self, index, role=None, name=None):
        index = np.asarray(index, dtype=np.int64)
        return replace(
            self,
            features=self.features[index],
            targets=None if self.targets is None else self.targets[index],
            role=role or self.role,
            name=name or self.name,
        )

    def with_role(self, role, name=None):
        return replace(self, role=role, name=name or self.name)


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ImproperlyConfigured('Split fractions must be three non-negative numbers, got %s.' % (self.fractions,))
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ImproperlyConfigured('Split fractions must sum to 1, got %s.' % (self.fractions,))


@dataclass(frozen=True)
class OodParams:
    """Constants of the synthetic outlier transformations."""
    blur_width: int = 3
    blur_passes: int = 2
    contrast_range: tuple = (0.05, 0.3)


def gen_two_moons(m, noise_std=0.1, seed=0):
    """Two interleaved unit half-circles with Gaussian noise.

    Label 0 lies on (cos t, sin t), label 1 on (1 - cos t, 0.5 - sin t), t in [0, pi].
    Class counts differ by at most one.
    """
    if m < 2:
        raise ValueError('At least 2 points are needed, got %s.' % (m,))
    random_state = int(Rng(seed).integers(2 ** 31))
    features, labels = make_moons(n_samples=int(m), noise=noise_std or None, random_state=random_state)
    return Dataset(features, labels, role='train', task='classification', name='two_moons')


def gen_toy_regression(m, x_range=(-4.0, 4.0), noise_std=0.1, seed=0):
    """Noisy y = sin(2x) observed on two disjoint clusters of x inside x_range.

    The clusters cover the 10%-35% and 65%-90% portions of the range, leaving a
    gap in the middle and empty borders.
    """
    if m < 2:
        raise ValueError('At least 2 points are needed, got %s.' % (m,))
    low, high = float(x_range[0]), float(x_range[1])
    if not low < high:
        raise ValueError('Invalid x_range %s.' % (x_range,))

    rng = Rng(seed)
    width = high - low
    first = m // 2
    x = np.concatenate([
        rng.uniform(low + 0.10 * width, low + 0.35 * width, first),
        rng.uniform(low + 0.65 * width, low + 0.90 * width, m - first),
    ])
    y = np.sin(2.0 * x)
    if noise_std:
        y = y + noise_std * rng.standard_normal(m)
    return Dataset(x[:, None], y[:, None], role='train', task='regression', name='toy_regression')


def _blur(features, params):
    if features.shape[1] < params.blur_width:
        raise ValueError('Blurring needs at least %s features, got %s.' % (params.blur_width, features.shape[1]))
    for _ in range(params.blur_passes):
        features = uniform_filter1d(features, size=params.blur_width, axis=1, mode='nearest')
    return features


def _contrast(features, rng, params):
    low, high = params.contrast_range
    scale = rng.uniform(low, high, len(features))[:, None]
    mean = features.mean(axis=1, keepdims=True)
    return scale * (features - mean) + mean


def synthesize_ood(in_data, kind, rng, params=OodParams()):
    """Builds an outlier set from inliers.

    permute: every row gets an independent random permutation of its coordinates.
    blur: a box filter of width 3 (edges replicated) along the feature vector, applied twice.
    contrast: x <- c (x - mean(x)) + mean(x) per row, c ~ U[0.05, 0.3].
    mixed: permute, then blur, then contrast.

    Raises:
        A ValueError for an empty set, an unknown kind, or blurring fewer than 3 features.
    """
    if len(in_data) == 0:
        raise ValueError('Cannot synthesize outliers from an empty set.')
    if kind not in OOD_KINDS:
        raise ValueError('Unknown OOD kind %r, expected one of %s.' % (kind, ', '.join(OOD_KINDS)))

    features = in_data.features
    if kind in ('permute', 'mixed'):
        features = rng.permuted(features, axis=1)
    if kind in ('blur', 'mixed'):
        features = _blur(features, params)
    if kind in ('contrast', 'mixed'):
        features = _contrast(features, rng, params)

    return Dataset(features, role='out', name='%s-%s' % (in_data.name, kind))


def gen_uniform_noise(m, n, low=0.0, high=1.0, seed=0, scale=1.0):
    """Uniform [low, high] noise times scale (5000 gives the asymptotic outlier set)."""
    if not low < high:
        raise ValueError('Invalid noise range [%s, %s].' % (low, high))
    features = Rng(seed).uniform(low, high, (int(m), int(n))) * scale
    name = 'uniform' if scale == 1 else 'uniform-x%g' % (scale,)
    return Dataset(features, role='out', name=name)


def _scaler_stats(scaler):
    return StandardizationStats(mean=scaler.mean_.copy(), std=scaler.scale_.copy())


def standardize(train, others=(), targets=False):
    """Standardizes features (and optionally regression targets) with the TRAIN statistics.

    Zero-variance columns keep a unit scale, so they map to all zeros.

    Returns:
        (standardized train, list of standardized others, feature StandardizationStats)
    """
    if len(train) == 0:
        raise ValueError('Cannot standardize with an empty training set.')

    scaler = StandardScaler().fit(train.features)
    stats = _scaler_stats(scaler)
    target_scaler = target_stats = None
    if targets and train.task == 'regression':
        target_scaler = StandardScaler().fit(train.targets)
        target_stats = _scaler_stats(target_scaler)

    constant = int(np.sum(np.var(train.features, axis=0) == 0))
    if constant:
        logger.info('%s - Standardization => %s constant column(s), std clamped to 1' % (train.log_desc, constant))

    def transform(data):
        new_targets = data.targets
        if target_scaler is not None and data.targets is not None and data.task == 'regression':
            new_targets = target_scaler.transform(data.targets)
        return replace(data, features=scaler.transform(data.features), targets=new_targets, stats=stats, target_stats=target_stats)

    return transform(train), [transform(d) for d in others], stats


def unstandardize(data):
    """Maps a standardized dataset back to its original scale."""
    if data.stats is None:
        return data
    features = data.features * data.stats.std + data.stats.mean
    targets = data.targets
    if data.target_stats is not None and targets is not None:
        targets = targets * data.target_stats.std + data.target_stats.mean
    return replace(data, features=features, targets=targets, stats=None, target_stats=None)


def split(data, spec=SplitSpec()):
    """Shuffles and splits data into disjoint (train, val, test) sets.

    Sizes are round(f_train m), round(f_val m) and the remainder.
    """
    m = len(data)
    n_train = min(m, int(round(spec.fractions[0] * m)))
    n_val = min(m - n_train, int(round(spec.fractions[1] * m)))
    order = Rng(spec.seed).permutation(m)
    return (
        data.subset(order[:n_train], role='train'),
        data.subset(order[n_train:n_train + n_val], role='val'),
        data.subset(order[n_train + n_val:], role='test'),
    )


def load_csv(path, target_column, header=True, task='regression'):
    """Reads a rectangular numeric CSV (comma separated, '.' decimals, UTF-8).

    Args:
        path: the CSV file
        target_column: the header name of the target column, or its 0-based index when there is no header
        header: whether the first line is a header row
        task: 'regression' or 'classification'

    Returns:
        A Dataset whose features are all the other columns in file order.

    Raises:
        A DataFormatError naming the 1-based data row and column of the first bad cell,
        or the missing target column.
    """
    if task not in TASKS:
        raise ImproperlyConfigured('Unknown task %r.' % (task,))
    try:
        frame = pd.read_csv(path, header=0 if header else None, dtype=str, keep_default_na=False, skipinitialspace=True, encoding='utf-8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as err:
        raise DataFormatError('%s cannot be parsed: %s' % (path, err))

    columns = list(frame.columns)
    if header:
        if target_column not in columns:
            raise DataFormatError('Target column %r not found in %s (columns: %s).' % (target_column, path, ', '.join(str(c) for c in columns)))
        target_index = columns.index(target_column)
    else:
        try:
            target_index = int(target_column)
            target_index = range(len(columns))[target_index]
        except (ValueError, TypeError, IndexError):
            raise DataFormatError('Target column %r not found in %s (%s columns).' % (target_column, path, len(columns)))

    values = frame.apply(lambda column: pd.to_numeric(column.str.strip(), errors='coerce'))
    bad = values.isna().to_numpy()
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DataFormatError('%s: non-numeric cell %r at row %s, column %s.' % (path, frame.iat[row, col], row + 1, col + 1))

    matrix = values.to_numpy(dtype=np.float64)
    features = np.delete(matrix, target_index, axis=1)
    targets = matrix[:, target_index]
    name = str(path).replace('\\', '/').split('/')[-1]
    return Dataset(features, targets, role='train', task=task, name=name)
