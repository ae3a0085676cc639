"""Synthetic LETOR datasets labelled against an ensemble prefix.

Each query gets a hidden "peak" tree count ``t``. Document grades are
assigned from the cumulative ensemble score after ``t`` trees plus noise,
so the query's NDCG trajectory tends to rise until about ``t`` and drift
afterwards. Peaks are drawn from a skewed distribution with many early
values, a desk-scale stand-in for real data where most ideal exits sit near
the start of the ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import Document, QueryGroup, RankingDataset
from .metrics import rank_documents
from .model import Ensemble

# within-query score quantiles at which grades 1..4 start
GRADE_QUANTILES = (0.5, 0.7, 0.85, 0.95)


@dataclass(frozen=True)
class SyntheticData:
    dataset: RankingDataset
    peaks: dict[str, int]
    expected_scores: dict[str, np.ndarray]


def _grades(latent: np.ndarray) -> np.ndarray:
    # quantile from the bottom, with ties ordered as the ranker orders them
    n = len(latent)
    ranks = np.empty(n, dtype=np.float64)
    ranks[rank_documents(latent)] = 1.0 - (np.arange(n) + 0.5) / n
    return np.searchsorted(GRADE_QUANTILES, ranks, side="right").astype(np.int64)


def generate_synthetic_dataset(ensemble: Ensemble, num_queries: int, seed: int,
                               docs_per_query: tuple[int, int] = (10, 40),
                               noise: float = 0.3, prefix: str = "q",
                               decimals: int = 4) -> SyntheticData:
    """Random queries with features in [0, 1) rounded to `decimals` places.

    `noise` is relative to the spread of latent scores within a query.
    `expected_scores` holds each document's full-ensemble score, summed tree
    by tree at generation time.
    """
    if num_queries < 0:
        raise ValueError("num_queries must be >= 0")
    lo, hi = docs_per_query
    if not 1 <= lo <= hi:
        raise ValueError("docs_per_query must satisfy 1 <= lo <= hi")
    rng = np.random.default_rng(seed % 2**64)
    L = len(ensemble)
    groups, peaks, expected = [], {}, {}
    for q in range(num_queries):
        qid = f"{prefix}{q + 1}"
        n = int(rng.integers(lo, hi + 1))
        X = np.round(rng.random((n, ensemble.num_features)), decimals)
        # log-uniform peak in [1, L]: dense at the start, thin at the end
        peak = min(L, max(1, int(round(np.exp(rng.uniform(0.0, np.log(L)))))))
        if rng.random() < 0.35:
            peak = L
        partial = np.full(n, ensemble.base_score)
        for t, tree in enumerate(ensemble.trees, start=1):
            partial = partial + tree.predict(X)
            if t == peak:
                at_peak = partial.copy()
        full = partial
        spread = np.std(at_peak) or 1.0
        latent = at_peak + rng.normal(0.0, noise * spread, size=n)
        labels = _grades(latent)
        docs = []
        for i in range(n):
            row = X[i].copy()
            row.flags.writeable = False
            docs.append(Document(row, int(labels[i]), i))
        groups.append(QueryGroup(qid, tuple(docs)))
        peaks[qid] = peak
        expected[qid] = full
    ds = RankingDataset(tuple(groups), ensemble.num_features)
    return SyntheticData(ds, peaks, expected)
