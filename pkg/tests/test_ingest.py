import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qexit.ingest import (LetorParseError, RankingDataset, dataset_stats, format_letor,
                          parse_letor)


def test_single_line_densified():
    ds = parse_letor("2 qid:7 1:0.5 3:-1.2\n")
    (g,) = ds.groups
    assert g.query_id == "7"
    d = g.documents[0]
    assert d.label == 2 and d.ordinal == 0
    assert d.features.tolist() == [0.5, 0.0, -1.2]
    assert ds.num_features == 3


def test_empty_input():
    ds = parse_letor("")
    assert len(ds) == 0
    assert dataset_stats(ds).num_documents == 0


def test_grouping_preserves_order():
    ds = parse_letor("1 qid:7 1:1\n0 qid:7 1:2\n3 qid:9 1:3\n")
    assert [g.query_id for g in ds] == ["7", "9"]
    assert [len(g) for g in ds] == [2, 1]
    assert ds["7"].labels.tolist() == [1, 0]
    assert [d.ordinal for d in ds["7"].documents] == [0, 1]


def test_comments_and_blank_lines():
    text = "# header\n\n1 qid:1 2:0.5 # docid = 17\n   \n0 qid:1 1:1.0#x\n"
    ds = parse_letor(text)
    assert len(ds["1"]) == 2
    assert ds["1"].features.tolist() == [[0.0, 0.5], [1.0, 0.0]]


def test_declared_num_features_pads():
    ds = parse_letor("1 qid:1 2:0.5\n", declared_num_features=5)
    assert ds.num_features == 5
    assert ds["1"].features.shape == (1, 5)


def test_noncontiguous_qid_becomes_new_group(caplog):
    with caplog.at_level(logging.WARNING, logger="qexit.ingest"):
        ds = parse_letor("1 qid:1 1:1\n0 qid:2 1:1\n2 qid:1 1:3\n")
    assert [g.query_id for g in ds] == ["1", "2", "1@2"]
    assert "reappears" in caplog.text


def test_suffix_avoids_existing_ids():
    ds = parse_letor("1 qid:1@2 1:1\n1 qid:1 1:1\n0 qid:2 1:1\n2 qid:1 1:3\n")
    assert len({g.query_id for g in ds}) == 4


@pytest.mark.parametrize("line, fragment", [
    ("x qid:1 1:1", "not an integer"),
    ("2.5 qid:1 1:1", "not an integer"),
    ("5 qid:1 1:1", "outside"),
    ("-1 qid:1 1:1", "outside"),
    ("1 1:0.5", "qid"),
    ("1", "qid"),
    ("1 qid:1 0:0.5", ">= 1"),
    ("1 qid:1 -3:0.5", ">= 1"),
    ("1 qid:1 a:0.5", "not an integer"),
    ("1 qid:1 2:abc", "not a number"),
    ("1 qid:1 2", "malformed"),
])
def test_parse_errors(line, fragment):
    with pytest.raises(LetorParseError, match=fragment) as info:
        parse_letor("0 qid:1 1:1\n" + line + "\n")
    assert info.value.line_no == 2
    assert "line 2" in str(info.value)


def test_declared_too_small():
    with pytest.raises(LetorParseError, match="exceeds declared"):
        parse_letor("1 qid:1 4:0.5\n", declared_num_features=3)


def test_integral_float_label_accepted():
    assert parse_letor("3.0 qid:1 1:1\n")["1"].labels.tolist() == [3]


def test_custom_max_grade():
    ds = parse_letor("7 qid:1 1:1\n", max_grade=7)
    assert ds["1"].labels.tolist() == [7]


def test_stats():
    ds = parse_letor("0 qid:a 1:1\n0 qid:a 1:1\n4 qid:a 1:1\n"
                     "1 qid:b 1:1\n1 qid:b 1:1\n1 qid:b 2:1\n")
    st_ = dataset_stats(ds)
    assert (st_.num_queries, st_.num_documents, st_.num_features) == (2, 6, 2)
    assert st_.label_histogram == {0: 2, 1: 3, 4: 1}


def test_features_are_read_only():
    ds = parse_letor("1 qid:1 1:0.5\n")
    with pytest.raises(ValueError):
        ds["1"].documents[0].features[0] = 3.0


def test_duplicate_qids_rejected_by_constructor():
    ds = parse_letor("1 qid:1 1:1\n")
    with pytest.raises(ValueError):
        RankingDataset(ds.groups * 2, 1)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@st.composite
def letor_rows(draw):
    n_feat = draw(st.integers(1, 6))
    n_groups = draw(st.integers(0, 4))
    rows = []
    for q in range(n_groups):
        for _ in range(draw(st.integers(1, 4))):
            feats = draw(st.dictionaries(st.integers(1, n_feat), finite, max_size=n_feat))
            rows.append((draw(st.integers(0, 4)), f"q{q}", feats))
    return n_feat, rows


def _render(rows, shuffle_seed=None):
    rng = np.random.default_rng(shuffle_seed)
    lines = []
    for label, qid, feats in rows:
        items = list(feats.items())
        if shuffle_seed is not None:
            rng.shuffle(items)
        lines.append(" ".join([str(label), f"qid:{qid}"] + [f"{i}:{v!r}" for i, v in items]))
    return "\n".join(lines) + "\n"


@settings(max_examples=100, deadline=None)
@given(letor_rows())
def test_round_trip(data):
    n_feat, rows = data
    ds = parse_letor(_render(rows), declared_num_features=n_feat)
    again = parse_letor(format_letor(ds), declared_num_features=n_feat)
    assert [g.query_id for g in again] == [g.query_id for g in ds]
    for a, b in zip(ds, again):
        assert a.documents == b.documents


@settings(max_examples=100, deadline=None)
@given(letor_rows(), st.integers(0, 2**32 - 1))
def test_densification_order_independent(data, seed):
    n_feat, rows = data
    a = parse_letor(_render(rows), declared_num_features=n_feat)
    b = parse_letor(_render(rows, shuffle_seed=seed), declared_num_features=n_feat)
    for ga, gb in zip(a, b):
        assert ga.documents == gb.documents
