"""Uncertainty metrics: MMC, AUR (area under ROC), Brier score and regression summaries."""
# Python stdlib
from dataclasses import dataclass, field

# Third-party
import numpy as np
import pandas as pd
from scipy.stats import rankdata

SIMPLEX_TOLERANCE = 1e-6
REPORT_COLUMNS = ('dataset', 'role', 'mmc', 'aur', 'brier', 'accuracy', 'mean_std', 'log_likelihood', 'rmse')


def _check_simplex(probabilities):
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.ndim != 2 or not len(probabilities):
        raise ValueError('Expected a non-empty batch of probability vectors, got shape %s.' % (probabilities.shape,))
    if np.any(probabilities < -SIMPLEX_TOLERANCE) or np.any(np.abs(probabilities.sum(axis=1) - 1.0) > SIMPLEX_TOLERANCE):
        raise ValueError('Rows must lie on the probability simplex.')
    return probabilities


def confidences(probabilities):
    """Maximum class probability of every row."""
    return _check_simplex(probabilities).max(axis=1)


def mmc(probabilities):
    """Mean maximum confidence: mean over rows of the largest probability."""
    return float(np.mean(confidences(probabilities)))


def auroc(in_conf, out_conf):
    """Area under the ROC curve separating inliers (positive) from outliers by confidence.

    Computed exactly as the Mann-Whitney statistic P(in > out) + 1/2 P(in = out):
    the rank sum of the inliers uses average ranks for ties, so U is an exact
    half-integer before the final division.
    """
    in_conf = np.asarray(in_conf, dtype=np.float64).ravel()
    out_conf = np.asarray(out_conf, dtype=np.float64).ravel()
    if not len(in_conf) or not len(out_conf):
        raise ValueError('Both confidence vectors must be non-empty.')

    n_in, n_out = len(in_conf), len(out_conf)
    ranks = rankdata(np.concatenate([in_conf, out_conf]), method='average')
    u_statistic = ranks[:n_in].sum() - n_in * (n_in + 1) / 2.0
    return float(u_statistic / (n_in * n_out))


def brier(probabilities, labels):
    """Mean over rows of sum_c (p_c - 1[y = c])^2."""
    probabilities = _check_simplex(probabilities)
    labels = np.asarray(labels).astype(np.int64).ravel()
    if len(labels) != len(probabilities) or np.any(labels < 0) or np.any(labels >= probabilities.shape[1]):
        raise ValueError('Labels must match the rows and lie in [0, %s).' % (probabilities.shape[1],))
    one_hot = np.eye(probabilities.shape[1])[labels]
    return float(np.mean(np.sum((probabilities - one_hot) ** 2, axis=1)))


def accuracy(probabilities, labels):
    labels = np.asarray(labels).astype(np.int64).ravel()
    return float(np.mean(np.argmax(probabilities, axis=1) == labels))


def classification_log_likelihood(probabilities, labels):
    """Mean log predictive probability of the true labels."""
    labels = np.asarray(labels).astype(np.int64).ravel()
    p = probabilities[np.arange(len(labels)), labels]
    return float(np.mean(np.log(np.maximum(p, np.finfo(np.float64).tiny))))


def gaussian_log_likelihood(mean, variance, targets):
    """Mean Gaussian log predictive density (normalization constants included)."""
    targets = np.asarray(targets, dtype=np.float64).reshape(mean.shape)
    per_point = -0.5 * (np.log(2.0 * np.pi * variance) + (targets - mean) ** 2 / variance)
    return float(np.mean(per_point.sum(axis=1)))


def mean_predictive_std(variance):
    """Mean over points (and outputs) of the predictive standard deviation."""
    return float(np.mean(np.sqrt(variance)))


def rmse(mean, targets):
    targets = np.asarray(targets, dtype=np.float64).reshape(mean.shape)
    return float(np.sqrt(np.mean((mean - targets) ** 2)))


@dataclass
class DatasetMetrics:
    name: str
    role: str
    mmc: float = np.nan
    aur: float = np.nan
    brier: float = np.nan
    accuracy: float = np.nan
    mean_std: float = np.nan
    log_likelihood: float = np.nan
    rmse: float = np.nan
    confidences: np.ndarray = None

    def as_row(self):
        return dict((column, getattr(self, 'name' if column == 'dataset' else column)) for column in REPORT_COLUMNS)


@dataclass
class EvalReport:
    """Per-dataset metrics of one evaluation run."""
    entries: list = field(default_factory=list)

    def add(self, entry):
        self.entries.append(entry)
        return entry

    def __getitem__(self, name):
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def to_frame(self):
        return pd.DataFrame([entry.as_row() for entry in self.entries], columns=list(REPORT_COLUMNS))

    def confidence_frame(self):
        """Long format (dataset, index, value) of the raw confidences (or predictive stds)."""
        frames = []
        for entry in self.entries:
            if entry.confidences is None:
                continue
            frames.append(pd.DataFrame({
                'dataset': entry.name,
                'index': np.arange(len(entry.confidences)),
                'value': entry.confidences,
            }))
        if not frames:
            return pd.DataFrame(columns=['dataset', 'index', 'value'])
        return pd.concat(frames, ignore_index=True)


def summarize_reports(reports):
    """Mean and standard deviation of every metric over repeated runs.

    Returns:
        A DataFrame with one row per dataset and <metric>_mean, <metric>_std columns.
    """
    frame = pd.concat([report.to_frame() for report in reports], ignore_index=True)
    metrics = [column for column in REPORT_COLUMNS if column not in ('dataset', 'role')]
    grouped = frame.groupby(['dataset', 'role'], sort=False)[metrics]
    summary = grouped.mean().add_suffix('_mean').join(grouped.std(ddof=0).add_suffix('_std'))
    ordered = [c for metric in metrics for c in (metric + '_mean', metric + '_std')]
    return summary[ordered].reset_index()
