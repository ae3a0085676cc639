"""DCG / NDCG@k and per-checkpoint NDCG trajectories.

Gain is ``2**rel - 1``, discount ``log2(rank + 1)`` with 1-based ranks.
Ties in score are broken by ascending document ordinal (file order).
A query whose ideal DCG is zero gets NDCG 0.0 and is flagged.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scorer import CheckpointSet, PrefixScoreMatrix, score_prefixes


def rank_documents(scores, ordinals=None) -> np.ndarray:
    """Document indices sorted by descending score, ties by ascending ordinal."""
    scores = np.asarray(scores, dtype=np.float64)
    if ordinals is None:
        ordinals = np.arange(len(scores))
    else:
        ordinals = np.asarray(ordinals)
        if ordinals.shape != scores.shape:
            raise ValueError("scores and ordinals differ in length")
    # lexsort sorts by the last key first; negate for descending score
    return np.lexsort((ordinals, -scores))


def _discounts(k: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, k + 2, dtype=np.float64))


def dcg_at_k(ranked_labels, k: int) -> float:
    """DCG@k of labels already in rank order."""
    if k <= 0:
        raise ValueError("k must be positive")
    rel = np.asarray(ranked_labels, dtype=np.float64)[:k]
    return float(np.sum((np.exp2(rel) - 1.0) * _discounts(len(rel))))


def ideal_dcg_at_k(labels, k: int) -> float:
    return dcg_at_k(np.sort(np.asarray(labels))[::-1], k)


def ndcg_at_k(scores, labels, k: int = 10, ordinals=None) -> float:
    """NDCG@k of the ranking induced by `scores`; 0.0 when ideal DCG is 0."""
    if k <= 0:
        raise ValueError("k must be positive")
    labels = np.asarray(labels)
    if len(labels) != len(scores):
        raise ValueError("scores and labels differ in length")
    idcg = ideal_dcg_at_k(labels, k)
    if idcg == 0.0:
        return 0.0
    order = rank_documents(scores, ordinals)
    return dcg_at_k(labels[order], k) / idcg


@dataclass(frozen=True)
class NdcgTrajectory:
    query_id: str
    checkpoints: CheckpointSet
    values: np.ndarray
    k: int = 10
    zero_idcg: bool = False

    def __post_init__(self):
        if len(self.values) != len(self.checkpoints):
            raise ValueError("trajectory and checkpoint set differ in length")

    @property
    def positions(self) -> tuple[int, ...]:
        return self.checkpoints.positions

    @property
    def full(self) -> float:
        """NDCG with the whole ensemble (last checkpoint)."""
        return float(self.values[-1])

    def at(self, position: int) -> float:
        return float(self.values[self.checkpoints.index(position)])

    def restrict(self, cps: CheckpointSet) -> NdcgTrajectory:
        """The same trajectory sampled on a subset of its checkpoints."""
        idx = [self.checkpoints.index(p) for p in cps.positions]
        return NdcgTrajectory(self.query_id, cps, self.values[idx], self.k, self.zero_idcg)


def ndcg_trajectory(m: PrefixScoreMatrix, labels, k: int = 10) -> NdcgTrajectory:
    if k <= 0:
        raise ValueError("k must be positive")
    labels = np.asarray(labels)
    if m.scores.shape[1] != len(labels):
        raise ValueError(f"query {m.query_id}: {m.scores.shape[1]} scores, {len(labels)} labels")
    idcg = ideal_dcg_at_k(labels, k)
    values = np.zeros(len(m.checkpoints), dtype=np.float64)
    if idcg > 0.0:
        ordinals = np.arange(len(labels))
        for c, row in enumerate(m.scores):
            values[c] = dcg_at_k(labels[rank_documents(row, ordinals)], k) / idcg
    values.flags.writeable = False
    return NdcgTrajectory(m.query_id, m.checkpoints, values, k, idcg == 0.0)


def mean_ndcg(values: Sequence[float]) -> float:
    """Arithmetic mean, summed left to right in the given order."""
    values = list(values)
    if not values:
        raise ValueError("mean of an empty sequence")
    total = 0.0
    for v in values:
        total += float(v)
    return total / len(values)


def dataset_trajectories(ensemble, dataset, cps: CheckpointSet, k: int = 10,
                         threads: int = 1) -> list[NdcgTrajectory]:
    """Score every query at `cps` and return trajectories in dataset order.

    Queries are independent, so they may be spread over `threads` workers;
    each query is still accumulated sequentially and results come back in
    input order, so the output does not depend on `threads`.
    """
    def one(group):
        return ndcg_trajectory(score_prefixes(ensemble, group, cps), group.labels, k)

    if threads > 1 and len(dataset.groups) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, dataset.groups))
    return [one(g) for g in dataset.groups]
