"""Sentinel placement and oracle-decided evaluation.

A sentinel is a tree position where each query may stop. Given per-query
NDCG trajectories, a query stops at the earliest of ``sentinels + (L,)``
that maximises its NDCG over that set. Placement searches every
``k``-combination of candidate positions for the highest mean NDCG.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exitlab import GroupRow, OverallRecord, aggregate_report
from .metrics import NdcgTrajectory, mean_ndcg


@dataclass(frozen=True)
class SentinelConfig:
    sentinels: tuple[int, ...]

    def __post_init__(self):
        s = tuple(int(p) for p in self.sentinels)
        object.__setattr__(self, "sentinels", s)
        if not s:
            raise ValueError("at least one sentinel is required")
        if s[0] < 1:
            raise ValueError("sentinel positions must be >= 1")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("sentinel positions must be strictly increasing")

    @classmethod
    def parse(cls, text: str) -> SentinelConfig:
        """From a comma-separated list such as ``"25,300"``."""
        try:
            return cls(tuple(int(t) for t in text.split(",") if t.strip()))
        except ValueError as exc:
            raise ValueError(f"bad sentinel list {text!r}: {exc}") from None

    def exits(self, num_trees: int) -> tuple[int, ...]:
        if self.sentinels[-1] >= num_trees:
            raise ValueError(f"sentinel {self.sentinels[-1]} must be < L={num_trees}")
        return self.sentinels + (num_trees,)

    def __str__(self):
        return ",".join(map(str, self.sentinels))


def _value_matrix(trajs: Sequence[NdcgTrajectory], positions: Sequence[int]) -> np.ndarray:
    """Trajectory values at `positions`, shape (queries, positions)."""
    if not trajs:
        return np.zeros((0, len(positions)))
    cps = trajs[0].checkpoints
    if all(t.checkpoints == cps for t in trajs):
        try:
            idx = [cps.index(p) for p in positions]
        except ValueError:
            missing = [p for p in positions if p not in cps]
            raise ValueError(f"positions {missing} are not checkpoints of the trajectories") from None
        return np.vstack([t.values for t in trajs])[:, idx]
    rows = []
    for t in trajs:
        try:
            rows.append([t.values[t.checkpoints.index(p)] for p in positions])
        except ValueError:
            raise ValueError(f"query {t.query_id}: positions {list(positions)} not all "
                             f"checkpoints") from None
    return np.array(rows, dtype=np.float64)


def _num_trees(trajs: Sequence[NdcgTrajectory], num_trees: int | None) -> int:
    if num_trees is not None:
        return num_trees
    if not trajs:
        raise ValueError("num_trees is required when there are no trajectories")
    return trajs[0].positions[-1]


def decide_exits(config: SentinelConfig, trajs: Sequence[NdcgTrajectory],
                 num_trees: int | None = None) -> dict[str, int]:
    """Oracle exit per query restricted to the sentinels and ``L``."""
    exits = config.exits(_num_trees(trajs, num_trees))
    V = _value_matrix(trajs, exits)
    choice = np.argmax(V, axis=1) if len(trajs) else []
    return {t.query_id: exits[int(c)] for t, c in zip(trajs, choice)}


@dataclass(frozen=True)
class EvaluationReport:
    config: SentinelConfig | None
    num_trees: int
    rows: tuple[GroupRow, ...]
    overall: OverallRecord
    per_query_exits: Mapping[str, int] = field(default_factory=dict)
    num_zero_idcg: int = 0


def evaluate_config(config: SentinelConfig, trajs: Sequence[NdcgTrajectory],
                    num_trees: int | None = None, *, weighting: str = "queries",
                    doc_counts: Mapping[str, int] | None = None) -> EvaluationReport:
    """Group queries by chosen exit and summarise each group.

    Groups that receive no query are left out of `rows`, so the rows always
    partition the query set. `doc_counts` (query id to number of documents)
    is needed for ``weighting="documents"``.
    """
    if not trajs:
        raise ValueError("no trajectories to evaluate")
    L = _num_trees(trajs, num_trees)
    exits = config.exits(L)
    V = _value_matrix(trajs, exits)
    choice = np.argmax(V, axis=1)
    full = V[:, -1]
    chosen = V[np.arange(len(trajs)), choice]
    rows = []
    for c, pos in enumerate(exits):
        members = np.flatnonzero(choice == c)
        if len(members) == 0:
            continue
        n_docs = None
        if doc_counts is not None:
            n_docs = sum(doc_counts[trajs[i].query_id] for i in members)
        rows.append(GroupRow.make(pos, len(members), mean_ndcg(full[members]),
                                  mean_ndcg(chosen[members]), L, n_docs))
    overall = aggregate_report(rows, len(trajs), L, weighting)
    per_query = {t.query_id: exits[int(c)] for t, c in zip(trajs, choice)}
    return EvaluationReport(config, L, tuple(rows), overall, per_query,
                            sum(t.zero_idcg for t in trajs))


def report_from_rows(rows: Sequence[GroupRow], num_trees: int,
                     config: SentinelConfig | None = None) -> EvaluationReport:
    """Wrap already aggregated group rows (e.g. a published table) in a report."""
    rows = tuple(rows)
    total = sum(r.num_queries for r in rows)
    return EvaluationReport(config, num_trees, rows, aggregate_report(rows, total, num_trees))


@dataclass(frozen=True)
class PlacementResult:
    best: SentinelConfig
    objective: float
    ranking: tuple[tuple[SentinelConfig, float], ...]


def _objectives(V: np.ndarray, combos: Sequence[tuple[int, ...]]) -> list[float]:
    n = V.shape[0]
    last = V.shape[1] - 1
    out = []
    for combo in combos:
        best = np.max(V[:, list(combo) + [last]], axis=1)
        # fsum is exactly rounded, so equal-valued configs compare equal
        out.append(math.fsum(best.tolist()) / n)
    return out


def search_placements(k: int, candidates: Iterable[int], trajs: Sequence[NdcgTrajectory],
                      num_trees: int | None = None, threads: int = 1) -> PlacementResult:
    """Exhaustive search over all ``k``-subsets of `candidates`.

    The objective of a configuration is the mean, over queries, of the best
    NDCG among its sentinels and ``L``. Equal objectives rank the
    lexicographically smaller position tuple first. `candidates` may include
    ``L``; it is dropped since ``L`` is always an exit.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not trajs:
        raise ValueError("no validation trajectories")
    L = _num_trees(trajs, num_trees)
    cands = sorted(set(int(c) for c in candidates) - {L})
    if any(c < 1 or c > L for c in cands):
        raise ValueError(f"candidates must lie in [1, {L})")
    if k > len(cands):
        raise ValueError(f"k={k} exceeds the {len(cands)} candidate positions")
    V = _value_matrix(trajs, cands + [L])
    combos = list(itertools.combinations(range(len(cands)), k))
    if threads > 1 and len(combos) > 1:
        size = math.ceil(len(combos) / threads)
        chunks = [combos[i:i + size] for i in range(0, len(combos), size)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            objectives = [v for part in pool.map(lambda ch: _objectives(V, ch), chunks)
                          for v in part]
    else:
        objectives = _objectives(V, combos)
    configs = [SentinelConfig(tuple(cands[i] for i in combo)) for combo in combos]
    # combinations() yields lexicographic order, and sort is stable
    order = sorted(range(len(configs)), key=lambda i: -objectives[i])
    ranking = tuple((configs[i], objectives[i]) for i in order)
    return PlacementResult(ranking[0][0], ranking[0][1], ranking)


# --------------------------------------------------------------------------
# rendering

REPORT_COLUMNS = ("sentinel", "position", "num_queries", "pct_queries", "ndcg_L",
                  "ndcg_exit", "gain_pct", "speedup", "ndcg_L_raw", "ndcg_exit_raw",
                  "gain_pct_raw", "speedup_raw")


def _report_line(label, position, n, total, full, at_exit, gain, spd):
    return "\t".join([
        label, str(position), str(n), f"{100.0 * n / total:.0f}",
        f"{full:.4f}", f"{at_exit:.4f}", f"{gain:+.1f}", f"{spd:.1f}",
        repr(float(full)), repr(float(at_exit)), repr(float(gain)), repr(float(spd)),
    ])


def format_report_tsv(report: EvaluationReport) -> str:
    """Results table as TSV: one row per exit group, then ``Overall``.

    Rounded columns follow the usual table style (NDCG to 4 places, gain
    and speedup to 1); the ``*_raw`` columns carry full precision.
    """
    total = report.overall.num_queries
    lines = ["\t".join(REPORT_COLUMNS)]
    for i, r in enumerate(report.rows, start=1):
        label = "L" if r.exit_position == report.num_trees else str(i)
        lines.append(_report_line(label, r.exit_position, r.num_queries, total,
                                  r.ndcg_full, r.ndcg_at_exit, r.gain_pct, r.speedup))
    o = report.overall
    lines.append(_report_line("Overall", report.num_trees, o.num_queries, total,
                              o.ndcg_full, o.ndcg_exit, o.gain_pct, o.speedup))
    return "\n".join(lines) + "\n"


def report_to_dict(report: EvaluationReport) -> dict:
    o = report.overall
    return {
        "sentinels": list(report.config.sentinels) if report.config else None,
        "num_trees": report.num_trees,
        "num_zero_idcg": report.num_zero_idcg,
        "rows": [{"exit_position": r.exit_position, "num_queries": r.num_queries,
                  "num_documents": r.num_documents, "ndcg_full": r.ndcg_full,
                  "ndcg_at_exit": r.ndcg_at_exit, "gain_pct": r.gain_pct,
                  "speedup": r.speedup} for r in report.rows],
        "overall": {"num_queries": o.num_queries, "ndcg_full": o.ndcg_full,
                    "ndcg_exit": o.ndcg_exit, "gain_pct": o.gain_pct,
                    "mean_exit_position": o.mean_exit_position, "speedup": o.speedup},
        "per_query_exits": dict(report.per_query_exits),
    }


def format_report_json(report: EvaluationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"
