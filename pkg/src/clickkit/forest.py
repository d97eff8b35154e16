"""Random forest of binary Gini trees, written against numpy only.

Each tree is grown on a bootstrap draw of the training rows. At every node
a random subset of ``ceil(sqrt(n_features))`` features is searched for the
threshold that minimizes weighted Gini impurity; if none of them lowers
the impurity, the remaining features are tried before the node is made a
leaf. Growth stops at pure nodes, nodes with fewer than two rows, and
nodes no feature can improve.

Trees are stored as flat arrays (``feature``, ``threshold``, ``left``,
``right``, ``counts``) so that prediction is a vectorized walk and
serialization is a plain dump of lists.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateModelError, InvalidInputError, ModelLoadError

CLASSES = ("click", "echo", "other")
MAGIC = b"CKRF"
FORMAT_VERSION = 1
_HEADER = struct.Struct(">4sHQ")
_MIN_GAIN = 1e-12


@dataclass
class Tree:
    feature: np.ndarray  # int, -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # [n_nodes, n_classes]

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_class(self) -> np.ndarray:
        return np.argmax(self.counts, axis=1)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf reached by each row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_class()[self.apply(X)]


def gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity of class-count rows (last axis = classes)."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / total[..., None]
        g = 1.0 - np.sum(p * p, axis=-1)
    return np.where(total > 0, g, 0.0)


def best_split_for_feature(values: np.ndarray, y: np.ndarray, n_classes: int):
    """Lowest weighted Gini over all thresholds of one feature.

    Returns ``(impurity, threshold)`` or ``None`` for a constant feature.
    Thresholds are midpoints between consecutive distinct values; rows
    with ``value <= threshold`` go left.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    distinct = np.flatnonzero(v[1:] > v[:-1])
    if distinct.size == 0:
        return None
    onehot = np.zeros((len(v), n_classes))
    onehot[np.arange(len(v)), y[order]] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1][distinct]
    total = onehot.sum(axis=0)
    right = total - left
    n_left = (distinct + 1).astype(np.float64)
    n_right = len(v) - n_left
    score = (n_left * gini(left) + n_right * gini(right)) / len(v)
    k = int(np.argmin(score))
    i = distinct[k]
    thr = 0.5 * (v[i] + v[i + 1])
    if not v[i] <= thr < v[i + 1]:
        thr = v[i]
    return float(score[k]), float(thr)


def grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, max_features: int,
              rng: np.random.Generator) -> Tree:
    n_features = X.shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        node_counts = counts[node]
        if len(idx) < 2 or np.count_nonzero(node_counts) < 2:
            continue
        parent = float(gini(node_counts))
        perm = rng.permutation(n_features)
        best = None
        for candidates in (perm[:max_features], perm[max_features:]):
            for f in candidates:
                res = best_split_for_feature(X[idx, f], y[idx], n_classes)
                if res is not None and (best is None or res[0] < best[0]):
                    best = (res[0], res[1], int(f))
            if best is not None and best[0] < parent - _MIN_GAIN:
                break
        if best is None or best[0] >= parent - _MIN_GAIN:
            continue
        _, thr, f = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=np.int64).reshape(-1, n_classes))


@dataclass
class ForestModel:
    trees: list[Tree]
    classes: tuple[str, ...] = CLASSES
    feature_count: int = 0
    rng_seed: int = 0
    context_size: int = 5
    format_version: int = FORMAT_VERSION
    metadata: dict = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_count:
            raise InvalidInputError(
                f"model expects {self.feature_count} features, got {X.shape[1]}")
        return X

    def votes(self, X) -> np.ndarray:
        """``[n_rows, n_classes]`` count of trees voting for each class."""
        X = self._check(X)
        out = np.zeros((len(X), len(self.classes)), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            np.add.at(out, (rows, tree.predict(X)), 1)
        return out

    def predict_index(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Plurality class index (ties -> lower index) and winning vote share."""
        v = self.votes(X)
        winner = np.argmax(v, axis=1)
        return winner, v[np.arange(len(v)), winner] / self.n_trees

    def predict(self, X) -> tuple[list[str], np.ndarray]:
        idx, score = self.predict_index(X)
        return [self.classes[i] for i in idx], score


def train_forest(X, y, n_trees: int = 10, seed: int = 0, max_features: int | None = None,
                 classes: Sequence[str] = CLASSES, context_size: int = 5) -> ForestModel:
    """Fit ``n_trees`` trees; tree ``k`` draws from ``SeedSequence(seed).spawn(...)[k]``.

    ``y`` holds class indices into ``classes``. The result depends only on
    ``seed`` and the row order of ``X``/``y``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise InvalidInputError("training matrix must be 2-D and nonempty")
    if len(y) != len(X):
        raise InvalidInputError(f"{len(X)} rows but {len(y)} labels")
    if y.min() < 0 or y.max() >= len(classes):
        raise InvalidInputError("labels must index into classes")
    if len(np.unique(y)) < 2:
        raise DegenerateModelError("training data holds a single class")
    if n_trees < 1:
        raise InvalidInputError("n_trees must be >= 1")
    n, d = X.shape
    max_features = max_features or math.ceil(math.sqrt(d))
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, n, n)
        trees.append(grow_tree(X[boot], y[boot], len(classes), max_features, rng))
    return ForestModel(trees, tuple(classes), d, int(seed), context_size)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _model_payload(model: ForestModel) -> dict:
    return {
        "classes": list(model.classes),
        "feature_count": model.feature_count,
        "rng_seed": model.rng_seed,
        "context_size": model.context_size,
        "metadata": model.metadata,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "counts": t.counts.tolist(),
            }
            for t in model.trees
        ],
    }


def dumps_model(model: ForestModel) -> bytes:
    body = json.dumps(_model_payload(model), sort_keys=True, separators=(",", ":")).encode()
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(body)) + body


def loads_model(data: bytes) -> ForestModel:
    if len(data) < _HEADER.size:
        raise ModelLoadError("model file is truncated (no header)")
    magic, version, length = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelLoadError(f"bad magic {magic!r}, not a forest model")
    if version != FORMAT_VERSION:
        raise ModelLoadError(f"unsupported model format version {version} "
                             f"(expected {FORMAT_VERSION})")
    body = data[_HEADER.size:]
    if len(body) != length:
        raise ModelLoadError(f"model body is {len(body)} bytes, header says {length}")
    try:
        p = json.loads(body)
        n_classes = len(p["classes"])
        trees = [Tree(np.array(t["feature"], dtype=np.int64),
                      np.array(t["threshold"], dtype=np.float64),
                      np.array(t["left"], dtype=np.int64),
                      np.array(t["right"], dtype=np.int64),
                      np.array(t["counts"], dtype=np.int64).reshape(-1, n_classes))
                 for t in p["trees"]]
        model = ForestModel(trees, tuple(p["classes"]), int(p["feature_count"]),
                            int(p["rng_seed"]), int(p["context_size"]), version,
                            dict(p.get("metadata", {})))
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelLoadError(f"corrupt model body: {exc}") from None
    for t in model.trees:
        internal = t.feature >= 0
        if np.any(t.feature[internal] >= model.feature_count) or (
                np.any(t.left[internal] >= t.n_nodes) or np.any(t.right[internal] >= t.n_nodes)):
            raise ModelLoadError("tree references a feature or node out of range")
    return model


def save_model(model: ForestModel, path) -> None:
    Path(path).write_bytes(dumps_model(model))


def load_model(path) -> ForestModel:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ModelLoadError(f"cannot read model {path}: {exc}") from None
    return loads_model(data)
