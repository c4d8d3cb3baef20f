"""Decision forests and hinge-loss linear models over sparse attribute rows.

Both serialise to a plain list/dict form that is what gets costed, and can
be rebuilt from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels


@dataclass(frozen=True)
class PredictorSpec:
    kind: str = "forest"
    n_trees: int = 10
    max_depth: int = 8
    feature_limit: int = 1000
    l2: float = 1e-4
    epochs: int = 50
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.kind not in ("forest", "linear"):
            raise ValueError(f"unknown predictor kind {self.kind!r}")

    @property
    def short(self) -> str:
        return {"forest": "rf", "linear": "svm"}[self.kind]


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    def leaf(self, x: np.ndarray) -> int:
        node = 0
        feature, threshold, left, right = self.feature, self.threshold, self.left, self.right
        while feature[node] >= 0:
            node = left[node] if x[feature[node]] <= threshold[node] else right[node]
        return node

    def positive_share(self, x: np.ndarray) -> float:
        c0, c1 = self.counts[self.leaf(x)]
        return c1 / (c0 + c1) if c0 + c1 else 0.0

    def leaves(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row of ``X``, walking all rows one level at a time."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        live = self.feature[node] >= 0
        while live.any():
            r, at = rows[live], node[live]
            go_left = X[r, self.feature[at]] <= self.threshold[at]
            node[live] = np.where(go_left, self.left[at], self.right[at])
            live = self.feature[node] >= 0
        return node

    def positive_shares(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.leaves(X)]
        tot = c.sum(axis=1)
        return np.where(tot > 0, c[:, 1] / np.where(tot > 0, tot, 1), 0.0)

    def to_canonical(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "counts": self.counts.ravel().tolist()}

    @classmethod
    def from_canonical(cls, obj) -> "Tree":
        return cls(np.array(obj["feature"], np.int64), np.array(obj["threshold"], np.float64),
                   np.array(obj["left"], np.int64), np.array(obj["right"], np.int64),
                   np.array(obj["counts"], np.int64).reshape(-1, 2))


@dataclass(frozen=True)
class Classifier:
    kind: str
    feature_map: np.ndarray
    trees: tuple = ()
    tree_weights: tuple = ()
    coef: np.ndarray | None = None
    bias: float = 0.0
    constant: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    # ---- prediction -----------------------------------------------------

    def features(self, rows: sp.csr_matrix) -> np.ndarray:
        return dense_features(rows, self.feature_map)

    def decision(self, x: np.ndarray) -> float:
        if self.constant is not None:
            return float(self.constant)
        if self.kind == "forest":
            total = math.fsum(self.tree_weights)
            return math.fsum(w * t.positive_share(x) for w, t in zip(self.tree_weights, self.trees)) / total
        z = _row_normalize(x[None, :])[0]
        return float(z @ self.coef + self.bias)

    def predict_dense(self, X: np.ndarray) -> np.ndarray:
        if self.constant is not None:
            return np.full(X.shape[0], self.constant, dtype=np.int64)
        if self.kind == "forest":
            # same fsum arithmetic as decision(), with the tree walks batched
            total = math.fsum(self.tree_weights)
            shares = np.column_stack([w * t.positive_shares(X) for w, t in zip(self.tree_weights, self.trees)])
            return np.array([math.fsum(row) / total > 0.5 for row in shares.tolist()], dtype=np.int64)
        Z = _row_normalize(X)
        return (Z @ self.coef + self.bias > 0).astype(np.int64)

    def predict(self, rows: sp.csr_matrix) -> np.ndarray:
        return self.predict_dense(self.features(rows))

    # ---- canonical form ---------------------------------------------------

    def to_canonical(self) -> dict:
        obj = {"kind": self.kind, "features": self.feature_map.tolist()}
        if self.constant is not None:
            obj["constant"] = int(self.constant)
        elif self.kind == "forest":
            obj["trees"] = [t.to_canonical() for t in self.trees]
            obj["weights"] = list(self.tree_weights)
        else:
            obj["coef"] = self.coef.tolist()
            obj["bias"] = float(self.bias)
        return obj

    @classmethod
    def from_canonical(cls, obj) -> "Classifier":
        fmap = np.array(obj["features"], dtype=np.int64)
        if "constant" in obj:
            return cls(obj["kind"], fmap, constant=int(obj["constant"]))
        if obj["kind"] == "forest":
            return cls("forest", fmap, tuple(Tree.from_canonical(t) for t in obj["trees"]),
                       tuple(float(w) for w in obj["weights"]))
        return cls("linear", fmap, coef=np.array(obj["coef"], np.float64), bias=float(obj["bias"]))


# --------------------------------------------------------------------------
# features
# --------------------------------------------------------------------------


def select_features(rows: sp.csr_matrix, limit: int = 1000) -> np.ndarray:
    """Columns with the highest document frequency in ``rows`` (ties to lower id), sorted."""
    df = np.bincount(rows.indices, minlength=rows.shape[1])
    present = np.flatnonzero(df > 0)
    if present.size > limit:
        order = np.lexsort((present, -df[present]))
        present = np.sort(present[order[:limit]])
    return present.astype(np.int64)


def dense_features(rows: sp.csr_matrix, feature_map: np.ndarray) -> np.ndarray:
    rows = sp.csr_matrix(rows)
    if feature_map.size == 0:
        return np.zeros((rows.shape[0], 0))
    return rows[:, feature_map].toarray()


def _row_normalize(X: np.ndarray) -> np.ndarray:
    norms = np.sqrt((X * X).sum(axis=1))
    return X / np.where(norms > 0, norms, 1.0)[:, None]


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


def _fit_forest(X, y, spec: PredictorSpec, rng: np.random.Generator):
    m, d = X.shape
    mtry = max(1, int(math.sqrt(d))) if d else 0
    trees = []
    for _ in range(spec.n_trees):
        counts = np.bincount(rng.integers(m, size=m), minlength=m)
        tree_seed = int(rng.integers(2**31 - 1))
        trees.append(Tree(*kernels.grow_tree(X, y, counts, spec.max_depth, mtry, tree_seed)))
    return tuple(trees), tuple(1.0 for _ in trees)


def _fit_linear(X, y, spec: PredictorSpec):
    Z = _row_normalize(X)
    m, d = Z.shape
    s = np.where(y == 1, 1.0, -1.0)
    n_pos = int((y == 1).sum())
    # class-balanced sample weights
    sw = np.where(y == 1, m / (2.0 * n_pos), m / (2.0 * (m - n_pos)))
    w = np.zeros(d)
    b = 0.0
    for _ in range(spec.epochs):
        margin = s * (Z @ w + b)
        active = (margin < 1) * sw * s
        w -= spec.learning_rate * (spec.l2 * w - (active @ Z) / m)
        b -= spec.learning_rate * (-active.sum() / m)
    return w, float(b)


def train_classifier(rows: sp.csr_matrix, labels, spec: PredictorSpec, seed: int,
                     feature_map: np.ndarray | None = None) -> Classifier:
    """Fit a classifier on sparse attribute rows with binary labels.

    Single-class training data yields a constant classifier flagged through
    ``constant``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rows = sp.csr_matrix(rows)
    if rows.shape[0] == 0:
        raise ValueError("need at least one training row")
    if feature_map is None:
        feature_map = select_features(rows, spec.feature_limit)
    if labels.min() == labels.max():
        return Classifier(spec.kind, feature_map, constant=int(labels[0]))
    X = dense_features(rows, feature_map)
    rng = np.random.default_rng(seed)
    if spec.kind == "forest":
        trees, weights = _fit_forest(X, labels, spec, rng)
        return Classifier("forest", feature_map, trees, weights)
    coef, bias = _fit_linear(X, labels, spec)
    return Classifier("linear", feature_map, coef=coef, bias=bias)
