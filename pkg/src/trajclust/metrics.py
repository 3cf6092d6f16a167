"""Partition agreement and curve accuracy measures.

All partition metrics are label-invariant: they depend only on which
subjects share a group, not on how the groups are numbered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "Partition",
    "contingency",
    "rand_index",
    "normalized_mutual_information",
    "accuracy",
    "rmse_curve",
]


@dataclass
class Partition:
    """Group labels 1..K over n subjects."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if self.labels.ndim != 1 or len(self.labels) == 0:
            raise ValueError("labels must be a nonempty 1-d array")
        if self.labels.min() < 1:
            raise ValueError("labels must be >= 1")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def k(self) -> int:
        return len(np.unique(self.labels))

    def groups(self) -> list:
        """Member index arrays per label, in increasing label order."""
        return [np.flatnonzero(self.labels == g)
                for g in np.unique(self.labels)]


def _as_labels(partition) -> np.ndarray:
    if isinstance(partition, Partition):
        return partition.labels
    return np.asarray(partition, dtype=int)


def contingency(a, b) -> np.ndarray:
    """Cross-tabulation of two labelings of the same subjects."""
    a = _as_labels(a)
    b = _as_labels(b)
    if len(a) != len(b):
        raise ValueError(f"label lengths differ: {len(a)} vs {len(b)}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def rand_index(a, b) -> float:
    """Fraction of subject pairs on which two partitions agree."""
    table = contingency(a, b)
    n = int(table.sum())
    if n < 2:
        raise ValueError("rand index needs at least two subjects")

    def _pairs(counts):
        return float(np.sum(counts * (counts - 1) // 2))

    total = n * (n - 1) // 2
    both = _pairs(table.ravel())
    in_a = _pairs(table.sum(axis=1))
    in_b = _pairs(table.sum(axis=0))
    agreements = total + 2.0 * both - in_a - in_b
    return agreements / total


def normalized_mutual_information(a, b) -> float:
    """Mutual information over the geometric mean of entropies.

    Natural logarithms.  If both partitions are single groups the value
    is 1; if exactly one is, it is 0.
    """
    table = contingency(a, b)
    n = table.sum()
    # zero entropy is a structural fact (a single group), not a float
    # comparison: summing normalized marginals can miss an exact zero
    if table.shape == (1, 1):
        return 1.0
    if table.shape[0] == 1 or table.shape[1] == 1:
        return 0.0
    p = table / n
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n

    def _entropy(q):
        q = q[q > 0]
        return float(-np.sum(q * np.log(q)))

    ha, hb = _entropy(pa), _entropy(pb)
    nz = p > 0
    outer = pa[:, None] * pb[None, :]
    mi = float(np.sum(p[nz] * np.log(p[nz] / outer[nz])))
    return float(max(mi, 0.0) / np.sqrt(ha * hb))


def accuracy(estimated, truth) -> float:
    """Best-case fraction of correctly assigned subjects.

    Estimated groups are matched one-to-one to true groups (rectangular
    matching when the counts differ) to maximize the number of subjects
    on the diagonal.
    """
    table = contingency(estimated, truth)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum()) / float(table.sum())


def rmse_curve(estimate, truth) -> float:
    """Root mean squared gap between two curves on a shared grid."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(
            f"curve grids differ: {estimate.shape} vs {truth.shape}"
        )
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))
