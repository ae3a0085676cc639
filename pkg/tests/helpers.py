"""Test-only builders and independent oracles."""

import itertools
import math
from fractions import Fraction

import numpy as np

from qexit.metrics import NdcgTrajectory
from qexit.scorer import CheckpointSet


def traj(values, positions=None, qid="q"):
    values = np.asarray(values, dtype=np.float64)
    if positions is None:
        positions = range(1, len(values) + 1)
    return NdcgTrajectory(qid, CheckpointSet(tuple(positions)), values)


def trajs_from_dict(per_query: dict, positions):
    return [traj([vals[p] for p in positions], positions, qid) for qid, vals in per_query.items()]


def brute_force_placement(k, candidates, trajs, L):
    """Reference exhaustive search over plain Python lists.

    Returns (best_positions, best_objective). Sums are exact rationals; ties
    prefer the lexicographically smaller tuple. Shares no code with the
    library's search.
    """
    value_at = [dict(zip(t.positions, (Fraction(float(v)) for v in t.values))) for t in trajs]
    best, best_obj = None, None
    for combo in itertools.combinations(sorted(candidates), k):
        obj = sum(max(va[p] for p in combo + (L,)) for va in value_at) / len(trajs)
        if best is None or obj > best_obj or (obj == best_obj and combo < best):
            best, best_obj = combo, obj
    return best, float(best_obj)


def brute_dcg(ranked_labels, k):
    """Plain-Python DCG, written independently of the library."""
    return sum((2 ** rel - 1) / math.log2(i + 2) for i, rel in enumerate(ranked_labels[:k]))


def brute_ndcg(scores, labels, k):
    """NDCG with the ideal found by trying every permutation."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    ideal = max(brute_dcg([labels[i] for i in p], k)
                for p in itertools.permutations(range(len(labels))))
    if ideal == 0:
        return 0.0
    return brute_dcg([labels[i] for i in order], k) / ideal
