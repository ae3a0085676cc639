import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qexit.metrics import (dcg_at_k, ideal_dcg_at_k, mean_ndcg, ndcg_at_k, ndcg_trajectory,
                           rank_documents)
from qexit.scorer import CheckpointSet, PrefixScoreMatrix

from helpers import brute_dcg, brute_ndcg


def test_rank_documents():
    assert rank_documents([0.1, 0.9, 0.5]).tolist() == [1, 2, 0]
    assert rank_documents([1.0, 1.0, 1.0, 1.0]).tolist() == [0, 1, 2, 3]
    assert rank_documents([1.0, 2.0, 1.0], ordinals=[5, 0, 3]).tolist() == [1, 2, 0]


@settings(max_examples=200)
@given(st.lists(st.floats(-1e6, 1e6), min_size=0, max_size=30))
def test_rank_is_sorted_permutation(scores):
    order = rank_documents(scores)
    assert sorted(order.tolist()) == list(range(len(scores)))
    ranked = [scores[i] for i in order]
    assert all(a >= b for a, b in zip(ranked, ranked[1:]))


def test_perfect_ranking():
    assert ndcg_at_k([3.0, 2.0, 1.0, 0.0], [4, 2, 1, 0], 10) == 1.0


def test_all_zero_labels():
    assert ndcg_at_k([0.3, 0.1], [0, 0], 10) == 0.0


def test_worked_example():
    # labels [3, 2, 0]; scores rank the label-2 document above the label-3 one
    labels = [3, 2, 0]
    scores = [0.5, 0.9, 0.1]
    dcg = 3 / 1 + 7 / math.log2(3)
    idcg = 7 + 3 / math.log2(3)
    assert dcg == pytest.approx(7.41650, abs=1e-5)
    assert idcg == pytest.approx(8.89279, abs=1e-5)
    got = ndcg_at_k(scores, labels, 10)
    assert got == pytest.approx(0.83400, abs=1e-5)
    assert got == pytest.approx(dcg / idcg, abs=1e-15)
    # enumerate all 3! orderings: [3,2,0] 8.893, [3,0,2] 8.5, then this one
    values = sorted((brute_dcg([labels[i] for i in p], 10)
                     for p in itertools.permutations(range(3))), reverse=True)
    assert values[0] == pytest.approx(idcg, abs=1e-12)
    assert values[1] == pytest.approx(8.5, abs=1e-12)
    assert values[2] == pytest.approx(dcg, abs=1e-12)


def test_cutoff():
    # only the top document counts at k=1
    assert ndcg_at_k([1.0, 0.0], [0, 4], 1) == 0.0
    assert ndcg_at_k([0.0, 1.0], [0, 4], 1) == 1.0


@pytest.mark.parametrize("k", [0, -3])
def test_bad_k(k):
    with pytest.raises(ValueError):
        ndcg_at_k([1.0], [1], k)


def test_length_mismatch():
    with pytest.raises(ValueError):
        ndcg_at_k([1.0, 2.0], [1], 10)


def test_dcg_helpers():
    assert dcg_at_k([3, 2, 0], 10) == pytest.approx(brute_dcg([3, 2, 0], 10), abs=1e-15)
    assert ideal_dcg_at_k([0, 2, 3], 2) == pytest.approx(brute_dcg([3, 2], 2), abs=1e-15)


labels_st = st.lists(st.integers(0, 4), min_size=1, max_size=6)


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_matches_brute_force(data):
    labels = data.draw(labels_st)
    scores = data.draw(st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0, -1.0]),
                                min_size=len(labels), max_size=len(labels)))
    k = data.draw(st.integers(1, 8))
    assert ndcg_at_k(scores, labels, k) == pytest.approx(brute_ndcg(scores, labels, k),
                                                         abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_affine_invariance(data):
    n = data.draw(st.integers(1, 12))
    labels = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    scores = np.array(data.draw(st.lists(st.integers(-50, 50), min_size=n, max_size=n)),
                      dtype=float)
    a = data.draw(st.sampled_from([0.5, 1.0, 2.0, 4.0, 1024.0]))
    b = data.draw(st.sampled_from([-8.0, 0.0, 3.0, 100.0]))
    k = data.draw(st.integers(1, 10))
    assert ndcg_at_k(a * scores + b, labels, k) == ndcg_at_k(scores, labels, k)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_documents_below_cutoff_do_not_matter(data):
    n = data.draw(st.integers(2, 12))
    k = data.draw(st.integers(1, n - 1))
    labels = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    scores = np.arange(n, 0, -1, dtype=float) * 10.0    # strictly decreasing
    perturbed = scores.copy()
    tail = data.draw(st.lists(st.floats(0.0, 9.0), min_size=n - k, max_size=n - k))
    perturbed[k:] = np.array(tail)          # stays below rank-k score of >= 10
    assert ndcg_at_k(perturbed, labels, k) == ndcg_at_k(scores, labels, k)


def test_trajectory():
    cps = CheckpointSet((1, 2))
    # tree 2 lifts the label-4 document above the label-0 one
    m = PrefixScoreMatrix("q", cps, np.array([[1.0, 0.0], [1.0, 2.0]]))
    traj = ndcg_trajectory(m, [0, 4], k=1)
    assert traj.values.tolist() == [0.0, 1.0]
    assert traj.full == 1.0 and not traj.zero_idcg


def test_trajectory_constant_and_single():
    cps = CheckpointSet((3, 7, 9))
    m = PrefixScoreMatrix("q", cps, np.tile([0.3, 0.1, 0.2], (3, 1)))
    traj = ndcg_trajectory(m, [1, 2, 0], 10)
    assert len(set(traj.values.tolist())) == 1
    single = ndcg_trajectory(PrefixScoreMatrix("q", CheckpointSet((9,)), m.scores[-1:]),
                             [1, 2, 0], 10)
    assert single.values.tolist() == [ndcg_at_k(m.scores[-1], [1, 2, 0], 10)]


def test_trajectory_zero_idcg_flag():
    m = PrefixScoreMatrix("q", CheckpointSet((1,)), np.array([[1.0, 2.0]]))
    traj = ndcg_trajectory(m, [0, 0])
    assert traj.zero_idcg and traj.values.tolist() == [0.0]


def test_trajectory_restrict():
    m = PrefixScoreMatrix("q", CheckpointSet((1, 2, 3)),
                          np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))
    traj = ndcg_trajectory(m, [0, 4], 1)
    sub = traj.restrict(CheckpointSet((2, 3)))
    assert sub.values.tolist() == [1.0, 0.0]


def test_mean_ndcg():
    assert mean_ndcg([0.5]) == 0.5
    assert mean_ndcg([0.0, 1.0]) == 0.5
    with pytest.raises(ValueError):
        mean_ndcg([])
