"""Partition metrics against pair-counting and dict-counting references."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_nmi, brute_rand_index, random_partition
from trajclust.metrics import (
    Partition,
    accuracy,
    contingency,
    normalized_mutual_information,
    rand_index,
    rmse_curve,
)

labels_pair = st.integers(2, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(1, 4), min_size=n, max_size=n),
        st.lists(st.integers(1, 4), min_size=n, max_size=n),
    )
)


def test_partition_basics():
    p = Partition(np.array([2, 1, 2, 3]))
    assert p.n == 4
    assert p.k == 3
    groups = p.groups()
    assert [g.tolist() for g in groups] == [[1], [0, 2], [3]]


def test_partition_validation():
    with pytest.raises(ValueError, match="labels must be >= 1"):
        Partition(np.array([0, 1]))
    with pytest.raises(ValueError, match="nonempty 1-d"):
        Partition(np.array([]))
    with pytest.raises(ValueError, match="nonempty 1-d"):
        Partition(np.array([[1, 2]]))


def test_contingency_table():
    a = [1, 1, 2, 2, 3]
    b = [1, 2, 2, 2, 1]
    table = contingency(a, b)
    assert table.shape == (3, 2)
    assert np.array_equal(table, [[1, 1], [0, 2], [1, 0]])
    with pytest.raises(ValueError, match="label lengths differ"):
        contingency([1, 2], [1, 2, 3])


def test_rand_index_classic_example():
    # {1,2}{3,4} vs {1,3}{2,4}: only cross pairs (1,4) and (2,3) agree
    a = [1, 1, 2, 2]
    b = [1, 2, 1, 2]
    assert rand_index(a, b) == pytest.approx(1.0 / 3.0)


def test_rand_index_boundaries():
    assert rand_index([1, 1, 2, 2], [2, 2, 1, 1]) == 1.0
    assert rand_index([1, 2, 3], [3, 1, 2]) == 1.0
    assert rand_index([1, 1, 1], [1, 2, 3]) == 0.0
    with pytest.raises(ValueError, match="at least two"):
        rand_index([1], [1])


def test_nmi_conventions():
    # identical nontrivial partitions
    assert normalized_mutual_information([1, 2, 1], [2, 1, 2]) == 1.0
    # both single-group: agreement by convention
    assert normalized_mutual_information([1, 1], [1, 1]) == 1.0
    # one single-group: no information
    assert normalized_mutual_information([1, 1], [1, 2]) == 0.0
    assert normalized_mutual_information([1, 2], [1, 1]) == 0.0
    # independent-looking split has low but defined score
    val = normalized_mutual_information([1, 1, 2, 2], [1, 2, 1, 2])
    assert val == pytest.approx(0.0, abs=1e-12)


def test_nmi_trivial_partition_with_unequal_group_sizes():
    # marginals like 4/6+1/6+1/6 do not sum to 1.0 in floats; the
    # single-group convention must still return an exact 0
    a = [1, 1, 1, 1, 1, 1]
    b = [1, 1, 1, 1, 2, 3]
    assert normalized_mutual_information(a, b) == 0.0
    assert normalized_mutual_information(b, a) == 0.0


@settings(max_examples=200, deadline=None)
@given(labels_pair)
def test_metrics_match_brute_force(pair):
    a, b = pair
    assert rand_index(a, b) == pytest.approx(brute_rand_index(a, b),
                                             abs=1e-12)
    assert normalized_mutual_information(a, b) == pytest.approx(
        brute_nmi(a, b), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(labels_pair, st.permutations(list(range(1, 5))))
def test_relabeling_invariance(pair, perm):
    a, b = pair
    relabeled = [perm[x - 1] for x in b]
    assert rand_index(a, b) == pytest.approx(rand_index(a, relabeled),
                                             abs=1e-12)
    assert normalized_mutual_information(a, b) == pytest.approx(
        normalized_mutual_information(a, relabeled), abs=1e-12)
    assert accuracy(b, a) == pytest.approx(accuracy(relabeled, a), abs=1e-12)


def test_random_partitions_match_brute_force(rng):
    for _ in range(200):
        n = int(rng.integers(2, 30))
        a = random_partition(rng, n, max_groups=5)
        b = random_partition(rng, n, max_groups=5)
        assert rand_index(a, b) == brute_rand_index(a, b)
        assert normalized_mutual_information(a, b) == pytest.approx(
            brute_nmi(a, b), abs=1e-12)


def test_accuracy_hand_values():
    # one subject of four sits in the wrong group
    assert accuracy([1, 1, 1, 2], [1, 1, 2, 2]) == 0.75
    # label names do not matter
    assert accuracy([5, 5, 5, 7], [1, 1, 2, 2]) == 0.75
    assert accuracy([1, 2, 1, 2], [1, 2, 1, 2]) == 1.0


def test_accuracy_rectangular_matching():
    # all singletons against one group: only one subject can match
    n = 5
    est = list(range(1, n + 1))
    truth = [1] * n
    assert accuracy(est, truth) == pytest.approx(1.0 / n)
    assert accuracy(truth, est) == pytest.approx(1.0 / n)


def test_accuracy_is_maximal_matching():
    # greedy diagonal would get this wrong; assignment must find 4/6
    est = [1, 1, 1, 2, 2, 2]
    truth = [1, 2, 2, 1, 1, 2]
    table = contingency(est, truth)
    assert np.array_equal(table, [[1, 2], [2, 1]])
    assert accuracy(est, truth) == pytest.approx(4.0 / 6.0)


def test_rmse_curve():
    est = np.array([1.0, 2.0, 3.0])
    truth = np.array([1.0, 2.0, 5.0])
    assert rmse_curve(est, truth) == pytest.approx(np.sqrt(4.0 / 3.0))
    assert rmse_curve(est, est) == 0.0
    with pytest.raises(ValueError, match="curve grids differ"):
        rmse_curve(est, truth[:2])
