"""Shared builders and independent reference implementations.

The reference routines here are deliberately written in the slowest,
most literal style available (scalar loops, dict counting) so they
cannot share a bug with the vectorized library code they check.
"""

import math

import numpy as np
import pytest

from trajclust.data import LongitudinalDataset, SubjectRecord


def quad_dataset(coef_per_subject, t_count=12, noise=0.0, seed=None,
                 domain=(0.0, 1.0)):
    """Dataset of quadratic trajectories a*t^2 + b*t + c, one tuple per subject."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(domain[0], domain[1], t_count)
    subjects = []
    for i, (a, b, c) in enumerate(coef_per_subject):
        values = a * grid * grid + b * grid + c
        if noise:
            values = values + noise * rng.standard_normal(t_count)
        subjects.append(SubjectRecord(f"s{i:03d}", grid.copy(), values))
    return LongitudinalDataset(subjects)


def two_crowds(n_per_group=4, gap=8.0, t_count=12, noise=0.05, seed=0):
    """Two well separated crowds of near-identical quadratics."""
    rng = np.random.default_rng(seed)
    coefs = []
    for _ in range(n_per_group):
        coefs.append((1.0 + 0.01 * rng.standard_normal(),
                      -0.5, 0.1 * rng.standard_normal()))
    for _ in range(n_per_group):
        coefs.append((1.0, -0.5, gap + 0.1 * rng.standard_normal()))
    return quad_dataset(coefs, t_count=t_count, noise=noise, seed=seed + 1)


def set_partitions(n):
    """Every partition of range(n) as a 1-based label array.

    Labels follow first-appearance order (restricted growth strings), so
    each partition appears exactly once.
    """
    labels = np.zeros(n, dtype=int)

    def rec(i, k):
        if i == n:
            yield labels.copy()
            return
        for g in range(1, k + 2):
            labels[i] = g
            yield from rec(i + 1, max(k, g))

    yield from rec(0, 0)


def brute_rand_index(a, b):
    """Rand index by comparing every pair of items twice over."""
    n = len(a)
    agree = 0
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += 1
            same_a = a[i] == a[j]
            same_b = b[i] == b[j]
            if same_a == same_b:
                agree += 1
    if total == 0:
        return 1.0
    return agree / total


def brute_nmi(a, b):
    """NMI from a dict-counted contingency table, natural logs.

    Degenerate partitions follow the library convention: two zero-entropy
    partitions agree perfectly (1.0); one zero-entropy partition carries
    no information about the other (0.0).
    """
    n = len(a)
    joint = {}
    left = {}
    right = {}
    for x, y in zip(a, b):
        joint[(x, y)] = joint.get((x, y), 0) + 1
        left[x] = left.get(x, 0) + 1
        right[y] = right.get(y, 0) + 1
    h1 = -sum((c / n) * math.log(c / n) for c in left.values())
    h2 = -sum((c / n) * math.log(c / n) for c in right.values())
    if h1 == 0.0 and h2 == 0.0:
        return 1.0
    if h1 == 0.0 or h2 == 0.0:
        return 0.0
    info = 0.0
    for (x, y), c in joint.items():
        info += (c / n) * math.log(n * c / (left[x] * right[y]))
    return info / math.sqrt(h1 * h2)


def random_partition(rng, n, max_groups=None):
    """Labels drawn uniformly, renumbered to 1..k by first appearance."""
    k = max_groups or n
    raw = rng.integers(0, k, size=n)
    _, inverse = np.unique(raw, return_inverse=True)
    order = {}
    labels = np.empty(n, dtype=int)
    for i, g in enumerate(inverse):
        if g not in order:
            order[g] = len(order) + 1
        labels[i] = order[g]
    return labels


@pytest.fixture
def rng():
    return np.random.default_rng(314159)
