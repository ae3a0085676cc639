"""Additive ensembles of binary regression trees.

Split rule: go left iff ``x[split_feature] <= threshold``. NaN feature values
follow ``default_left``. Feature indices are 1-based (LETOR convention);
leaf values already include any learning-rate shrinkage.

Two on-disk formats are supported:

* the LightGBM text dump (``Tree=N`` blocks), read-only;
* a canonical JSON document, read and written losslessly::

    {
      "format": "qexit-ensemble",
      "version": 1,
      "num_features": 136,
      "base_score": 0.0,
      "trees": [
        {"root": 0,
         "nodes": [
           {"kind": "internal", "split_feature": 3, "threshold": 0.5,
            "left": 1, "right": 2, "default_left": true},
           {"kind": "leaf", "value": -0.01},
           {"kind": "leaf", "value": 0.02}
         ]}
      ]
    }

  Numbers are written with Python's shortest round-trip float repr, so every
  double survives a write/read cycle bit-exactly. A threshold or value may
  also be given as a hex-float string (``"0x1.999999999999ap-4"``).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, TextIO

import numpy as np

CANONICAL_FORMAT = "qexit-ensemble"
CANONICAL_VERSION = 1


class ModelParseError(ValueError):
    pass


class UnsupportedModelError(ModelParseError):
    """The model uses a construct outside numerical ``<=`` splits."""


@dataclass(frozen=True)
class TreeNode:
    is_leaf: bool
    value: float = 0.0
    split_feature: int = 0
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    default_left: bool = True

    @classmethod
    def leaf(cls, value: float) -> TreeNode:
        return cls(is_leaf=True, value=float(value))

    @classmethod
    def split(cls, feature: int, threshold: float, left: int, right: int,
              default_left: bool = True) -> TreeNode:
        return cls(is_leaf=False, split_feature=int(feature), threshold=float(threshold),
                   left=int(left), right=int(right), default_left=bool(default_left))

    @property
    def kind(self) -> str:
        return "leaf" if self.is_leaf else "internal"


class RegressionTree:
    """A binary regression tree stored as a node arena.

    The structure is validated on construction: children must be in range,
    distinct, and every non-root node must have exactly one parent, reachable
    from the root. Flat numpy arrays mirroring the arena are kept for batch
    traversal.
    """

    def __init__(self, nodes: Sequence[TreeNode], root: int = 0):
        self.nodes = tuple(nodes)
        self.root = int(root)
        self._validate()
        self._feature = np.array([nd.split_feature - 1 if not nd.is_leaf else 0
                                  for nd in self.nodes], dtype=np.intp)
        self._threshold = np.array([nd.threshold for nd in self.nodes], dtype=np.float64)
        self._left = np.array([nd.left if not nd.is_leaf else i
                               for i, nd in enumerate(self.nodes)], dtype=np.intp)
        self._right = np.array([nd.right if not nd.is_leaf else i
                                for i, nd in enumerate(self.nodes)], dtype=np.intp)
        self._default_left = np.array([nd.default_left for nd in self.nodes], dtype=bool)
        self._is_leaf = np.array([nd.is_leaf for nd in self.nodes], dtype=bool)
        self._value = np.array([nd.value if nd.is_leaf else 0.0 for nd in self.nodes],
                               dtype=np.float64)
        for arr in (self._feature, self._threshold, self._left, self._right,
                    self._default_left, self._is_leaf, self._value):
            arr.flags.writeable = False

    def _validate(self):
        n = len(self.nodes)
        if n == 0:
            raise ModelParseError("tree has no nodes")
        if not 0 <= self.root < n:
            raise ModelParseError(f"root index {self.root} out of range")
        parents = [0] * n
        for i, nd in enumerate(self.nodes):
            if nd.is_leaf:
                if not math.isfinite(nd.value):
                    raise ModelParseError(f"node {i}: non-finite leaf value")
                continue
            if nd.split_feature < 1:
                raise ModelParseError(f"node {i}: split_feature must be >= 1")
            if math.isnan(nd.threshold):
                raise ModelParseError(f"node {i}: NaN threshold")
            if nd.left == nd.right:
                raise ModelParseError(f"node {i}: children must be distinct")
            for c in (nd.left, nd.right):
                if not 0 <= c < n:
                    raise ModelParseError(f"node {i}: child {c} out of range")
                parents[c] += 1
        if parents[self.root] != 0:
            raise ModelParseError("root has a parent")
        for i, p in enumerate(parents):
            if i != self.root and p != 1:
                raise ModelParseError(f"node {i} has {p} parents")
        # reachability: with one parent each and a parentless root, any node not
        # reached from the root would sit on a cycle
        seen = 0
        stack = [self.root]
        while stack:
            i = stack.pop()
            seen += 1
            nd = self.nodes[i]
            if not nd.is_leaf:
                stack.extend((nd.left, nd.right))
        if seen != n:
            raise ModelParseError("tree contains unreachable nodes or a cycle")

    def __eq__(self, other):
        if not isinstance(other, RegressionTree):
            return NotImplemented
        return self.root == other.root and self.nodes == other.nodes

    __hash__ = None

    def __repr__(self):
        return f"RegressionTree(n_nodes={len(self.nodes)}, depth={self.depth})"

    @cached_property
    def depth(self) -> int:
        """Number of splits on the longest root-to-leaf path."""
        best = 0
        stack = [(self.root, 0)]
        while stack:
            i, d = stack.pop()
            nd = self.nodes[i]
            if nd.is_leaf:
                best = max(best, d)
            else:
                stack.append((nd.left, d + 1))
                stack.append((nd.right, d + 1))
        return best

    @property
    def max_split_feature(self) -> int:
        return max((nd.split_feature for nd in self.nodes if not nd.is_leaf), default=0)

    @property
    def leaves(self) -> list[int]:
        return [i for i, nd in enumerate(self.nodes) if nd.is_leaf]

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf values for every row of `X` (shape ``(n, >= num_features)``).

        Level-synchronous descent: all rows advance one level per step, so the
        loop runs `depth` times. Gives the same result as :func:`traverse_tree`
        row by row.
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be 2-d")
        idx = np.full(X.shape[0], self.root, dtype=np.intp)
        rows = np.arange(X.shape[0])
        for _ in range(self.depth):
            x = X[rows, self._feature[idx]]
            go_left = np.where(np.isnan(x), self._default_left[idx], x <= self._threshold[idx])
            idx = np.where(go_left, self._left[idx], self._right[idx])
        return self._value[idx]


def traverse_tree(tree: RegressionTree, features) -> float:
    """Walk one feature vector from the root to a leaf and return its value."""
    nd = tree.nodes[tree.root]
    while not nd.is_leaf:
        x = features[nd.split_feature - 1]
        if x != x:
            nxt = nd.left if nd.default_left else nd.right
        else:
            nxt = nd.left if x <= nd.threshold else nd.right
        nd = tree.nodes[nxt]
    return nd.value


class Ensemble:
    """Ordered additive ensemble; tree order is the order scores accumulate in."""

    def __init__(self, trees: Sequence[RegressionTree], num_features: int,
                 base_score: float = 0.0):
        self.trees = tuple(trees)
        self.num_features = int(num_features)
        self.base_score = float(base_score)
        if not self.trees:
            raise ModelParseError("ensemble must contain at least one tree")
        if self.num_features < 1:
            raise ModelParseError("num_features must be positive")
        if not math.isfinite(self.base_score):
            raise ModelParseError("base_score must be finite")
        top = max(t.max_split_feature for t in self.trees)
        if top > self.num_features:
            raise ModelParseError(
                f"split on feature {top} but num_features={self.num_features}")

    def __len__(self):
        return len(self.trees)

    def __getitem__(self, i):
        return self.trees[i]

    def __eq__(self, other):
        if not isinstance(other, Ensemble):
            return NotImplemented
        return (self.num_features == other.num_features
                and self.base_score == other.base_score
                and self.trees == other.trees)

    __hash__ = None

    def __repr__(self):
        return (f"Ensemble(num_trees={len(self.trees)}, num_features={self.num_features}, "
                f"base_score={self.base_score!r})")


# --------------------------------------------------------------------------
# LightGBM text dumps

_LGBM_ARRAY_KEYS = ("split_feature", "threshold", "decision_type",
                    "left_child", "right_child", "leaf_value")

_CATEGORICAL_MASK = 1
_DEFAULT_LEFT_MASK = 2
_MISSING_NONE, _MISSING_ZERO, _MISSING_NAN = 0, 1, 2


def _lgbm_tree(block: dict[str, str], tree_no: int) -> RegressionTree:
    def arr(key, conv, n):
        raw = block.get(key, "").split()
        if len(raw) != n:
            raise ModelParseError(
                f"Tree={tree_no}: {key} has {len(raw)} entries, expected {n}")
        try:
            return [conv(v) for v in raw]
        except ValueError:
            raise ModelParseError(f"Tree={tree_no}: bad value in {key}") from None

    try:
        num_leaves = int(block["num_leaves"])
    except (KeyError, ValueError):
        raise ModelParseError(f"Tree={tree_no}: missing or bad num_leaves") from None
    if num_leaves < 1:
        raise ModelParseError(f"Tree={tree_no}: num_leaves must be >= 1")
    if int(block.get("num_cat", "0")) != 0:
        raise UnsupportedModelError(f"Tree={tree_no}: categorical splits are not supported")
    if int(block.get("is_linear", "0")) != 0:
        raise UnsupportedModelError(f"Tree={tree_no}: linear trees are not supported")

    leaf_value = arr("leaf_value", float, num_leaves)
    if num_leaves == 1:
        return RegressionTree([TreeNode.leaf(leaf_value[0])])

    n_int = num_leaves - 1
    split_feature = arr("split_feature", int, n_int)
    threshold = arr("threshold", float, n_int)
    decision_type = arr("decision_type", int, n_int) if "decision_type" in block else [0] * n_int
    left_child = arr("left_child", int, n_int)
    right_child = arr("right_child", int, n_int)

    # internal nodes keep their indices; leaf j goes to n_int + j.
    # LightGBM encodes a leaf child j as ~j (= -j - 1).
    def child(c):
        return c if c >= 0 else n_int + (~c)

    nodes = []
    for i in range(n_int):
        dt = decision_type[i]
        if dt & _CATEGORICAL_MASK:
            raise UnsupportedModelError(f"Tree={tree_no}: categorical split at node {i}")
        missing = (dt >> 2) & 3
        if missing == _MISSING_NAN:
            default_left = bool(dt & _DEFAULT_LEFT_MASK)
        elif missing == _MISSING_NONE:
            # LightGBM maps NaN to 0.0 before comparing when no missing type is set
            default_left = 0.0 <= threshold[i]
        else:
            raise UnsupportedModelError(
                f"Tree={tree_no}: zero-as-missing split at node {i} is not supported")
        if split_feature[i] < 0:
            raise ModelParseError(f"Tree={tree_no}: negative split_feature")
        nodes.append(TreeNode.split(split_feature[i] + 1, threshold[i],
                                    child(left_child[i]), child(right_child[i]), default_left))
    nodes.extend(TreeNode.leaf(v) for v in leaf_value)
    try:
        return RegressionTree(nodes, root=0)
    except ModelParseError as exc:
        raise ModelParseError(f"Tree={tree_no}: {exc}") from None


def parse_text_model(stream: TextIO | str) -> Ensemble:
    """Parse a LightGBM text model dump into an :class:`Ensemble`.

    Only the header and the ``Tree=N`` blocks are read; everything from
    ``end of trees`` on (feature importances, parameters) is ignored.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header: dict[str, str] = {}
    blocks: list[tuple[int, dict[str, str]]] = []
    current = header
    for line in stream:
        line = line.strip()
        if not line:
            continue
        if line == "end of trees":
            break
        key, sep, value = line.partition("=")
        if not sep:
            continue  # the leading "tree" marker and similar bare lines
        if key == "Tree":
            try:
                tree_no = int(value)
            except ValueError:
                raise ModelParseError(f"bad tree header {line!r}") from None
            current = {}
            blocks.append((tree_no, current))
        else:
            current[key] = value

    if not blocks:
        raise ModelParseError("no Tree= blocks found")
    if int(header.get("num_class", "1")) != 1:
        raise UnsupportedModelError("multiclass models are not supported")
    trees = [_lgbm_tree(b, no) for no, b in blocks]
    top = max(t.max_split_feature for t in trees)
    if "max_feature_idx" in header:
        num_features = int(header["max_feature_idx"]) + 1
    else:
        num_features = max(top, 1)
    return Ensemble(trees, num_features, 0.0)


def read_text_model(path) -> Ensemble:
    with open(path, encoding="utf-8") as fh:
        return parse_text_model(fh)


# --------------------------------------------------------------------------
# canonical JSON

def _num(v, what):
    if isinstance(v, bool):
        raise ModelParseError(f"{what}: expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float.fromhex(v)
        except ValueError:
            pass
    raise ModelParseError(f"{what}: expected a number or hex-float string, got {v!r}")


def _int(v, what):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ModelParseError(f"{what}: expected an integer, got {v!r}")
    return v


def _node_from_json(obj, where) -> TreeNode:
    if not isinstance(obj, dict):
        raise ModelParseError(f"{where}: node must be an object")
    kind = obj.get("kind")
    if kind == "leaf":
        return TreeNode.leaf(_num(obj.get("value"), f"{where}.value"))
    if kind == "internal":
        dl = obj.get("default_left", True)
        if not isinstance(dl, bool):
            raise ModelParseError(f"{where}.default_left: expected a boolean")
        return TreeNode.split(_int(obj.get("split_feature"), f"{where}.split_feature"),
                              _num(obj.get("threshold"), f"{where}.threshold"),
                              _int(obj.get("left"), f"{where}.left"),
                              _int(obj.get("right"), f"{where}.right"),
                              dl)
    raise ModelParseError(f"{where}.kind: expected 'leaf' or 'internal', got {kind!r}")


def parse_canonical_model(stream: TextIO | str) -> Ensemble:
    text = stream if isinstance(stream, str) else stream.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelParseError("top level must be an object")
    if doc.get("format", CANONICAL_FORMAT) != CANONICAL_FORMAT:
        raise ModelParseError(f"unknown format {doc.get('format')!r}")
    if doc.get("version", CANONICAL_VERSION) != CANONICAL_VERSION:
        raise ModelParseError(f"unsupported version {doc.get('version')!r}")
    num_features = _int(doc.get("num_features"), "num_features")
    base_score = _num(doc.get("base_score", 0.0), "base_score")
    trees_obj = doc.get("trees")
    if not isinstance(trees_obj, list):
        raise ModelParseError("trees must be a list")
    trees = []
    for t, tobj in enumerate(trees_obj):
        if not isinstance(tobj, dict) or not isinstance(tobj.get("nodes"), list):
            raise ModelParseError(f"trees[{t}]: expected an object with a nodes list")
        nodes = [_node_from_json(n, f"trees[{t}].nodes[{i}]")
                 for i, n in enumerate(tobj["nodes"])]
        try:
            trees.append(RegressionTree(nodes, _int(tobj.get("root", 0), f"trees[{t}].root")))
        except ModelParseError as exc:
            raise ModelParseError(f"trees[{t}]: {exc}") from None
    return Ensemble(trees, num_features, base_score)


def _node_to_json(nd: TreeNode) -> dict:
    if nd.is_leaf:
        return {"kind": "leaf", "value": nd.value}
    return {"kind": "internal", "split_feature": nd.split_feature, "threshold": nd.threshold,
            "left": nd.left, "right": nd.right, "default_left": nd.default_left}


def write_canonical_model(e: Ensemble, stream: TextIO | None = None) -> str:
    """Serialize `e` to canonical JSON; also writes to `stream` if given."""
    doc = {
        "format": CANONICAL_FORMAT,
        "version": CANONICAL_VERSION,
        "num_features": e.num_features,
        "base_score": e.base_score,
        "trees": [{"root": t.root, "nodes": [_node_to_json(nd) for nd in t.nodes]}
                  for t in e.trees],
    }
    text = json.dumps(doc, indent=1, allow_nan=False) + "\n"
    if stream is not None:
        stream.write(text)
    return text


def read_model(path, fmt: str = "canonical") -> Ensemble:
    if fmt == "text":
        return read_text_model(path)
    if fmt == "canonical":
        with open(path, encoding="utf-8") as fh:
            return parse_canonical_model(fh)
    raise ValueError(f"unknown model format {fmt!r}")


# --------------------------------------------------------------------------
# synthetic ensembles

def _random_tree(rng: np.random.Generator, max_depth: int, num_features: int,
                 scale: float, split_prob: float = 0.8) -> RegressionTree:
    nodes: list[TreeNode | None] = []

    def grow(depth):
        i = len(nodes)
        nodes.append(None)
        # the root always splits so no tree is a constant
        if depth < max_depth and (depth == 0 or rng.random() < split_prob):
            feature = int(rng.integers(1, num_features + 1))
            threshold = float(rng.random())
            default_left = bool(rng.random() < 0.5)
            left = grow(depth + 1)
            right = grow(depth + 1)
            nodes[i] = TreeNode.split(feature, threshold, left, right, default_left)
        else:
            nodes[i] = TreeNode.leaf(float(rng.uniform(-1.0, 1.0)) * scale)
        return i

    grow(0)
    return RegressionTree(nodes, root=0)


def generate_synthetic_ensemble(num_trees: int, max_depth: int, num_features: int,
                                seed: int) -> Ensemble:
    """Random ensemble for tests and demos, deterministic in `seed`.

    Thresholds are uniform in [0, 1) and leaf values uniform in [-1, 1)
    scaled by ``1 / num_trees``, so full scores stay O(1) for features in
    [0, 1). Subtrees below the root stop splitting with probability 0.2 per
    node, giving a mix of full and pruned shapes.
    """
    for name, v in (("num_trees", num_trees), ("max_depth", max_depth),
                    ("num_features", num_features)):
        if v < 1:
            raise ValueError(f"{name} must be >= 1")
    rng = np.random.default_rng(seed % 2**64)
    scale = 1.0 / num_trees
    trees = [_random_tree(rng, max_depth, num_features, scale) for _ in range(num_trees)]
    return Ensemble(trees, num_features, 0.0)
