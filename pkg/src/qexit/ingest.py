"""LETOR / SVMLight ranking data: parsing, writing and summary statistics.

A LETOR line looks like::

    <label> qid:<id> <idx>:<val> <idx>:<val> ... [# comment]

Feature indices are 1-based. Absent indices are densified to 0.0.
"""

from __future__ import annotations

import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np

logger = logging.getLogger(__name__)

MAX_GRADE = 4


class LetorParseError(ValueError):
    """Raised on malformed LETOR input. Carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Document:
    features: np.ndarray
    label: int
    ordinal: int

    def __eq__(self, other):
        if not isinstance(other, Document):
            return NotImplemented
        return (self.label == other.label and self.ordinal == other.ordinal
                and np.array_equal(self.features, other.features))

    __hash__ = None


@dataclass(frozen=True)
class QueryGroup:
    query_id: str
    documents: tuple[Document, ...]

    def __post_init__(self):
        if not self.documents:
            raise ValueError(f"query {self.query_id!r} has no documents")
        for i, doc in enumerate(self.documents):
            if doc.ordinal != i:
                raise ValueError(f"query {self.query_id!r}: ordinals must be 0..n-1 in order")

    def __len__(self):
        return len(self.documents)

    @cached_property
    def features(self) -> np.ndarray:
        """Document feature matrix, shape (n_docs, num_features)."""
        mat = np.vstack([d.features for d in self.documents])
        mat.flags.writeable = False
        return mat

    @cached_property
    def labels(self) -> np.ndarray:
        labels = np.array([d.label for d in self.documents], dtype=np.int64)
        labels.flags.writeable = False
        return labels

    @property
    def ordinals(self) -> np.ndarray:
        return np.arange(len(self.documents))


@dataclass(frozen=True)
class RankingDataset:
    groups: tuple[QueryGroup, ...]
    num_features: int
    max_grade: int = MAX_GRADE
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [g.query_id for g in self.groups]
        if len(set(ids)) != len(ids):
            raise ValueError("query ids must be unique")
        object.__setattr__(self, "_index", {q: i for i, q in enumerate(ids)})

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, query_id: str) -> QueryGroup:
        return self.groups[self._index[query_id]]


def _parse_label(token: str, line_no: int, max_grade: int) -> int:
    try:
        label = int(token)
    except ValueError:
        # tolerate "2.0" style labels written by some tools, but only if integral
        try:
            value = float(token)
        except ValueError:
            raise LetorParseError(f"label {token!r} is not an integer", line_no) from None
        if not value.is_integer():
            raise LetorParseError(f"label {token!r} is not an integer", line_no)
        label = int(value)
    if not 0 <= label <= max_grade:
        raise LetorParseError(f"label {label} outside 0..{max_grade}", line_no)
    return label


def _parse_line(line: str, line_no: int, max_grade: int):
    body = line.split("#", 1)[0]
    tokens = body.split()
    if not tokens:
        return None
    label = _parse_label(tokens[0], line_no, max_grade)
    if len(tokens) < 2 or not tokens[1].startswith("qid:"):
        raise LetorParseError("missing qid: token", line_no)
    qid = tokens[1][4:]
    if not qid:
        raise LetorParseError("empty qid", line_no)
    sparse = {}
    for tok in tokens[2:]:
        idx_s, sep, val_s = tok.partition(":")
        if not sep:
            raise LetorParseError(f"malformed feature token {tok!r}", line_no)
        try:
            idx = int(idx_s)
        except ValueError:
            raise LetorParseError(f"feature index {idx_s!r} is not an integer", line_no) from None
        if idx <= 0:
            raise LetorParseError(f"feature index {idx} must be >= 1", line_no)
        try:
            val = float(val_s)
        except ValueError:
            raise LetorParseError(f"feature value {val_s!r} is not a number", line_no) from None
        sparse[idx] = val
    return label, qid, sparse


def parse_letor(stream: TextIO | str | Iterable[str],
                declared_num_features: int | None = None,
                max_grade: int = MAX_GRADE) -> RankingDataset:
    """Parse LETOR text into a :class:`RankingDataset`.

    `stream` may be a file object, any iterable of lines, or a string holding
    the whole file. Consecutive lines sharing a qid form one group; a qid that
    reappears after another qid opened a group becomes a new group whose id is
    suffixed ``@2``, ``@3``, ... and a warning is logged.
    """
    if declared_num_features is not None and declared_num_features < 1:
        raise ValueError("declared_num_features must be positive")
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    rows = []  # (group_id, label, sparse)
    seen_ids: dict[str, int] = {}
    current_raw = None
    current_id = None
    max_idx = 0
    for line_no, line in enumerate(stream, start=1):
        parsed = _parse_line(line, line_no, max_grade)
        if parsed is None:
            continue
        label, qid, sparse = parsed
        if sparse:
            top = max(sparse)
            if declared_num_features is not None and top > declared_num_features:
                raise LetorParseError(
                    f"feature index {top} exceeds declared num_features={declared_num_features}",
                    line_no)
            max_idx = max(max_idx, top)
        if qid != current_raw:
            n = seen_ids.get(qid, 0) + 1
            seen_ids[qid] = n
            if n > 1:
                current_id = f"{qid}@{n}"
                while current_id in seen_ids:
                    n += 1
                    current_id = f"{qid}@{n}"
                seen_ids[qid] = n
                logger.warning("line %d: qid %s reappears after a different qid; "
                               "treating it as a new group %s", line_no, qid, current_id)
            else:
                current_id = qid
            current_raw = qid
        rows.append((current_id, label, sparse))

    num_features = declared_num_features if declared_num_features is not None else max(max_idx, 1)
    groups = []
    pending: list[Document] = []
    pending_id = None
    for gid, label, sparse in rows:
        if gid != pending_id and pending:
            groups.append(QueryGroup(pending_id, tuple(pending)))
            pending = []
        pending_id = gid
        vec = np.zeros(num_features, dtype=np.float64)
        for idx, val in sparse.items():
            vec[idx - 1] = val
        vec.flags.writeable = False
        pending.append(Document(vec, label, len(pending)))
    if pending:
        groups.append(QueryGroup(pending_id, tuple(pending)))
    return RankingDataset(tuple(groups), num_features, max_grade)


def read_letor(path, declared_num_features=None, max_grade=MAX_GRADE) -> RankingDataset:
    with open(path, encoding="utf-8") as fh:
        return parse_letor(fh, declared_num_features, max_grade)


def format_letor(ds: RankingDataset, sparse: bool = True) -> str:
    """Render a dataset as LETOR text.

    Zero-valued features are dropped when `sparse` is true. Values use
    ``repr`` so they re-parse to the same doubles. Suffixed group ids from
    non-contiguous qids are written verbatim.
    """
    out = []
    for g in ds.groups:
        for d in g.documents:
            parts = [str(d.label), f"qid:{g.query_id}"]
            for i, v in enumerate(d.features, start=1):
                if sparse and v == 0.0 and not math.copysign(1.0, v) < 0:
                    continue
                parts.append(f"{i}:{float(v)!r}")
            out.append(" ".join(parts))
    return "\n".join(out) + ("\n" if out else "")


@dataclass(frozen=True)
class DatasetStats:
    num_queries: int
    num_documents: int
    label_histogram: dict[int, int]
    num_features: int


def dataset_stats(ds: RankingDataset) -> DatasetStats:
    hist = Counter()
    n_docs = 0
    for g in ds.groups:
        n_docs += len(g)
        hist.update(d.label for d in g.documents)
    return DatasetStats(len(ds.groups), n_docs, dict(sorted(hist.items())),
                        ds.num_features if ds.groups else 0)
