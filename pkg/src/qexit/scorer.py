"""Cumulative document scores at ensemble-prefix checkpoints.

Scores accumulate in float64 in strict tree order, one tree at a time for
all documents of a query. Checkpoints are snapshots of that single pass, so
the row at position ``L`` is bit-identical to :func:`score_full`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .ingest import QueryGroup
from .model import Ensemble


@dataclass(frozen=True)
class CheckpointSet:
    """Strictly increasing tree counts in ``[1, L]`` ending at ``L``."""

    positions: tuple[int, ...]

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if not pos:
            raise ValueError("checkpoint set must not be empty")
        if pos[0] < 1:
            raise ValueError("checkpoint positions must be >= 1")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("checkpoint positions must be strictly increasing")

    @classmethod
    def of(cls, positions: Iterable[int], num_trees: int) -> CheckpointSet:
        """Sorted, deduplicated `positions` plus `num_trees`."""
        pos = set(int(p) for p in positions)
        pos.add(int(num_trees))
        cps = cls(tuple(sorted(pos)))
        if cps.positions[-1] != num_trees:
            raise ValueError(f"checkpoint {cps.positions[-1]} beyond L={num_trees}")
        return cps

    @property
    def num_trees(self) -> int:
        return self.positions[-1]

    def __len__(self):
        return len(self.positions)

    def __iter__(self):
        return iter(self.positions)

    def __contains__(self, p):
        return p in self.positions

    def index(self, position: int) -> int:
        return self.positions.index(position)

    def check_for(self, e: Ensemble):
        if self.positions[-1] != len(e):
            raise ValueError(f"last checkpoint {self.positions[-1]} != ensemble length {len(e)}")


def make_checkpoints(num_trees: int, stride: int, include_first_tree: bool = False) -> CheckpointSet:
    """Every `stride`-th tree, optionally tree 1, and always the last tree."""
    if num_trees < 1:
        raise ValueError("num_trees must be >= 1")
    if not 1 <= stride <= num_trees:
        raise ValueError(f"stride must be in [1, {num_trees}], got {stride}")
    pos = set(range(stride, num_trees + 1, stride))
    if include_first_tree:
        pos.add(1)
    return CheckpointSet.of(pos, num_trees)


@dataclass(frozen=True)
class PrefixScoreMatrix:
    query_id: str
    checkpoints: CheckpointSet
    scores: np.ndarray  # (n_checkpoints, n_docs)

    @property
    def final(self) -> np.ndarray:
        return self.scores[-1]

    def row(self, position: int) -> np.ndarray:
        return self.scores[self.checkpoints.index(position)]


def _feature_matrix(e: Ensemble, group: QueryGroup) -> np.ndarray:
    X = group.features
    if X.shape[1] < e.num_features:
        # trailing features never seen in the data densify to 0.0
        X = np.hstack([X, np.zeros((X.shape[0], e.num_features - X.shape[1]))])
    return X


def tree_outputs(e: Ensemble, group: QueryGroup) -> np.ndarray:
    """Per-tree leaf values, shape ``(L, n_docs)``."""
    X = _feature_matrix(e, group)
    return np.vstack([t.predict(X) for t in e.trees])


def score_full(e: Ensemble, group: QueryGroup) -> np.ndarray:
    X = _feature_matrix(e, group)
    acc = np.full(X.shape[0], e.base_score, dtype=np.float64)
    for t in e.trees:
        acc += t.predict(X)
    return acc


def score_prefixes(e: Ensemble, group: QueryGroup, cps: CheckpointSet) -> PrefixScoreMatrix:
    cps.check_for(e)
    X = _feature_matrix(e, group)
    acc = np.full(X.shape[0], e.base_score, dtype=np.float64)
    out = np.empty((len(cps), X.shape[0]), dtype=np.float64)
    c = 0
    positions = cps.positions
    for t_no, t in enumerate(e.trees, start=1):
        acc += t.predict(X)
        if t_no == positions[c]:
            out[c] = acc
            c += 1
    out.flags.writeable = False
    return PrefixScoreMatrix(group.query_id, cps, out)
