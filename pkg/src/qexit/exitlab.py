"""Oracle exit analysis, query taxonomy and speedup accounting.

All per-query analysis works on :class:`~qexit.metrics.NdcgTrajectory`
objects. The cost model is linear in the number of trees traversed, so a
query exiting after tree ``p`` of ``L`` runs ``L / p`` times faster.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .metrics import NdcgTrajectory, mean_ndcg

DEFAULT_EPSILON = 0.01


@dataclass(frozen=True)
class OracleExit:
    query_id: str
    exit_position: int
    exit_ndcg: float
    full_ndcg: float

    @property
    def gain(self) -> float:
        return self.exit_ndcg - self.full_ndcg


def oracle_exit(traj: NdcgTrajectory) -> OracleExit:
    """Best checkpoint for a query; ties go to the earliest checkpoint."""
    values = traj.values
    if len(values) == 0:
        raise ValueError("empty trajectory")
    c = int(np.argmax(values))  # argmax returns the first maximum
    return OracleExit(traj.query_id, traj.positions[c], float(values[c]), traj.full)


def exit_histogram(exits: Iterable[OracleExit], bin_width: int = 1) -> dict[int, int]:
    """Count exits per bin; a bin is keyed by the first tree it covers.

    Bins are ``[1, w], [w+1, 2w], ...`` so with ``bin_width=1`` the key is
    the exit position itself. Only occupied bins appear, in ascending order.
    """
    if bin_width < 1:
        raise ValueError("bin_width must be >= 1")
    counts = Counter(((e.exit_position - 1) // bin_width) * bin_width + 1 for e in exits)
    return dict(sorted(counts.items()))


class QueryClass(enum.IntEnum):
    DECREASING = 1
    RISE_THEN_FALL_BELOW_START = 2
    FLAT = 3
    FLAT_WITH_BUMPS = 4
    INCREASING = 5
    RISE_THEN_FALL = 6

    @property
    def category(self) -> str:
        return {1: "worsening", 2: "worsening", 3: "flat", 4: "flat",
                5: "improving", 6: "improving"}[int(self)]

    @property
    def benefits_from_exit(self) -> bool:
        """Classes whose NDCG peaks before the end of the ensemble."""
        return int(self) in (1, 2, 4, 6)


def classify_query(traj: NdcgTrajectory | Sequence[float],
                   epsilon: float = DEFAULT_EPSILON) -> QueryClass:
    """Assign one of the six trajectory shapes.

    With ``s, e`` the first and last values and ``M, m`` the max and min:

    * 3 if ``M - m <= eps``;
    * 4 if ``|e - s| <= eps`` (but the range exceeds eps);
    * 1 or 2 if ``e < s - eps``: 2 when ``M > s + eps``, else 1;
    * 5 or 6 if ``e > s + eps``: 6 when ``M > e + eps``, else 5.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    values = np.asarray(traj.values if isinstance(traj, NdcgTrajectory) else traj,
                        dtype=np.float64)
    if len(values) < 2:
        raise ValueError("classification needs at least two checkpoints")
    s, e = values[0], values[-1]
    hi, lo = values.max(), values.min()
    if hi - lo <= epsilon:
        return QueryClass.FLAT
    if abs(e - s) <= epsilon:
        return QueryClass.FLAT_WITH_BUMPS
    if e < s:
        return QueryClass.RISE_THEN_FALL_BELOW_START if hi > s + epsilon else QueryClass.DECREASING
    return QueryClass.RISE_THEN_FALL if hi > e + epsilon else QueryClass.INCREASING


def class_counts(classes: Iterable[QueryClass]) -> dict[QueryClass, int]:
    counts = Counter(classes)
    return {c: counts.get(c, 0) for c in QueryClass}


def speedup(num_trees: int, exit_position: int) -> float:
    if num_trees < 1:
        raise ValueError("num_trees must be >= 1")
    if not 1 <= exit_position <= num_trees:
        raise ValueError(f"exit_position must be in [1, {num_trees}], got {exit_position}")
    return num_trees / exit_position


@dataclass(frozen=True)
class GroupRow:
    """Queries sharing one exit position, as in a sentinel results table.

    `ndcg_full` is the mean NDCG these queries get from the whole ensemble,
    `ndcg_at_exit` their mean NDCG when ranked at `exit_position`.
    """

    exit_position: int
    num_queries: int
    ndcg_full: float
    ndcg_at_exit: float
    speedup: float
    num_documents: int | None = None

    @classmethod
    def make(cls, exit_position: int, num_queries: int, ndcg_full: float,
             ndcg_at_exit: float, num_trees: int, num_documents: int | None = None) -> GroupRow:
        if exit_position == num_trees and ndcg_at_exit != ndcg_full:
            raise ValueError("terminal row must have ndcg_at_exit == ndcg_full")
        return cls(exit_position, num_queries, float(ndcg_full), float(ndcg_at_exit),
                   speedup(num_trees, exit_position), num_documents)

    @property
    def gain_pct(self) -> float:
        return relative_gain_pct(self.ndcg_full, self.ndcg_at_exit)


def relative_gain_pct(base: float, new: float) -> float:
    return 100.0 * (new / base - 1.0) if base else float("nan")


@dataclass(frozen=True)
class OverallRecord:
    num_queries: int
    ndcg_full: float
    ndcg_exit: float
    mean_exit_position: float
    speedup: float

    @property
    def gain_pct(self) -> float:
        return relative_gain_pct(self.ndcg_full, self.ndcg_exit)


def aggregate_report(rows: Sequence[GroupRow], total_queries: int, num_trees: int,
                     weighting: str = "queries") -> OverallRecord:
    """Combine per-group rows into the overall line of a results table.

    NDCG values are query-count-weighted means of the group means. Speedup is
    ``L`` over the mean exit position; with ``weighting="documents"`` each
    query's exit position is weighted by its document count instead (rows
    must then carry `num_documents`).
    """
    n = sum(r.num_queries for r in rows)
    if n != total_queries:
        raise ValueError(f"rows cover {n} queries, expected {total_queries}")
    if n == 0:
        raise ValueError("no queries to aggregate")
    full = sum(r.num_queries * r.ndcg_full for r in rows) / n
    at_exit = sum(r.num_queries * r.ndcg_at_exit for r in rows) / n
    if weighting == "queries":
        mean_exit = sum(r.num_queries * r.exit_position for r in rows) / n
    elif weighting == "documents":
        if any(r.num_documents is None for r in rows):
            raise ValueError("documents weighting needs num_documents on every row")
        n_docs = sum(r.num_documents for r in rows)
        mean_exit = sum(r.num_documents * r.exit_position for r in rows) / n_docs
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    return OverallRecord(n, full, at_exit, mean_exit, num_trees / mean_exit)


@dataclass(frozen=True)
class CurvePoint:
    position: int
    full_mean: float
    capped_oracle_mean: float
    exit_count: int


def oracle_curve(trajs: Sequence[NdcgTrajectory]) -> list[CurvePoint]:
    """Mean NDCG per checkpoint with and without oracle exits.

    For a budget of ``x`` trees, `full_mean` averages every query's NDCG at
    ``x``. `capped_oracle_mean` lets each query stop at ``min(x, its oracle
    exit)``, which reaches the oracle mean at ``x = L``. `exit_count` is the
    number of queries whose oracle exit is exactly ``x``. All trajectories
    must share one checkpoint set.
    """
    if not trajs:
        raise ValueError("no trajectories")
    cps = trajs[0].checkpoints
    if any(t.checkpoints != cps for t in trajs):
        raise ValueError("trajectories use different checkpoint sets")
    V = np.vstack([t.values for t in trajs])          # (q, c)
    exit_idx = np.argmax(V, axis=1)
    n_q, n_c = V.shape
    points = []
    for c in range(n_c):
        capped = V[np.arange(n_q), np.minimum(exit_idx, c)]
        points.append(CurvePoint(cps.positions[c], mean_ndcg(V[:, c]),
                                 mean_ndcg(capped), int(np.sum(exit_idx == c))))
    return points
