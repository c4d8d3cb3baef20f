"""Node weight functions: which other nodes train the predictor for node ``i``.

Seven kinds, in three representation classes:

============== ===================== ==================
kind           representation        encoding class
============== ===================== ==================
activity_flat  weight list           O(|V|)
degree_flat    weight list           O(|V|)
cluster        assignment list       O(|V|)
random         node-id list          O(|V|)
bfs            adjacency             O(|E|)
activity_net   exemplar adjacency    O(|V| * l)
degree_net     exemplar adjacency    O(|V| * l)
============== ===================== ==================
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import AttributeMatrix
from .louvain import louvain
from .netinfer import EdgeSet, knn_lists

LIST_KINDS = ("activity_flat", "degree_flat", "cluster", "random")
ADJACENCY_KINDS = ("bfs", "activity_net", "degree_net")
KINDS = LIST_KINDS + ADJACENCY_KINDS
NETWORK_KINDS = ("degree_flat", "cluster", "bfs", "degree_net")

REPRESENTATION = {
    "activity_flat": "weight_list",
    "degree_flat": "weight_list",
    "random": "weight_list",
    "cluster": "assignment_list",
    "bfs": "adjacency",
    "activity_net": "exemplar_adjacency",
    "degree_net": "exemplar_adjacency",
}
COST_CLASS = {
    "weight_list": "O(|V|)",
    "assignment_list": "O(|V|)",
    "adjacency": "O(|E|)",
    "exemplar_adjacency": "O(|V|*l)",
}

DEFAULT_FRACTION = 0.1
DEFAULT_BUDGET = 150


@dataclass(frozen=True)
class NodeWeightModel:
    kind: str
    node_count: int
    values: np.ndarray | None = None
    adjacency: EdgeSet | None = None
    support: np.ndarray | None = None
    exemplars: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.support is None:
            object.__setattr__(self, "support", np.arange(self.node_count, dtype=np.int64))
        if self.kind in LIST_KINDS:
            if self.values is None or len(self.values) != len(self.support):
                raise ValueError("list representations need one value per supported node")
        elif self.adjacency is None:
            raise ValueError(f"{self.kind} needs an adjacency")

    @property
    def representation_class(self) -> str:
        return REPRESENTATION[self.kind]

    @property
    def cost_class(self) -> str:
        return COST_CLASS[self.representation_class]

    @property
    def is_adjacency(self) -> bool:
        return self.kind in ADJACENCY_KINDS

    def full_values(self) -> np.ndarray:
        """Values scattered back to node positions (zeros outside the support)."""
        out = np.zeros(self.node_count, dtype=np.asarray(self.values).dtype)
        out[self.support] = self.values
        return out

    def representation(self):
        """The object whose compressed canonical form is the model's encoding cost."""
        if self.kind == "random":
            return self.support.tolist()
        if self.kind in LIST_KINDS:
            return np.asarray(self.values).tolist()
        return [self.adjacency.out_neighbors(i).tolist() for i in self.support]

    def with_adjacency(self, adjacency: EdgeSet) -> "NodeWeightModel":
        if not self.is_adjacency:
            raise ValueError(f"{self.kind} has no adjacency to replace")
        return replace(self, adjacency=adjacency)


def _uniform_fallback(kind: str, n: int) -> np.ndarray:
    warnings.warn(f"{kind}: all weights are zero, falling back to uniform weights")
    return np.ones(n, dtype=np.int64)


def make_activity_flat(A: AttributeMatrix) -> NodeWeightModel:
    w = A.nnz_per_row()
    if w.sum() == 0:
        w = _uniform_fallback("activity_flat", A.node_count)
    return NodeWeightModel("activity_flat", A.node_count, values=w)


def make_degree_flat(E: EdgeSet, mode: str = "total") -> NodeWeightModel:
    w = E.degree(mode).astype(np.int64)
    if w.sum() == 0:
        w = _uniform_fallback("degree_flat", E.node_count)
    return NodeWeightModel("degree_flat", E.node_count, values=w, params={"degree_mode": mode})


def make_cluster(E: EdgeSet, seed: int = 0) -> NodeWeightModel:
    return NodeWeightModel("cluster", E.node_count, values=louvain(E, seed=seed), params={"seed": seed})


def make_random(node_count: int) -> NodeWeightModel:
    return NodeWeightModel("random", node_count, values=np.ones(node_count, dtype=np.int64))


def make_bfs(E: EdgeSet) -> NodeWeightModel:
    return NodeWeightModel("bfs", E.node_count, adjacency=E)


def top_fraction(score: np.ndarray, fraction: float) -> np.ndarray:
    """Ids of the top ``ceil(fraction * n)`` nodes by score, ties to lower id, sorted ascending."""
    if not 0 < fraction <= 1:
        raise ValueError("exemplar fraction must be in (0, 1]")
    n = len(score)
    size = min(n, math.ceil(fraction * n))
    order = np.lexsort((np.arange(n), -np.asarray(score)))
    return np.sort(order[:size]).astype(np.int64)


def _exemplar_adjacency(A: AttributeMatrix, exemplars: np.ndarray, budget: int) -> EdgeSet:
    n = A.node_count
    is_ex = np.zeros(n, dtype=bool)
    is_ex[exemplars] = True
    src, dst = [], []
    for rows, avail in ((np.flatnonzero(~is_ex), exemplars.size), (np.flatnonzero(is_ex), exemplars.size - 1)):
        m = min(budget, avail)
        if m <= 0 or rows.size == 0:
            continue
        nbrs = knn_lists(A, m, cols=exemplars, rows=rows)
        src.append(np.repeat(rows, m))
        dst.append(nbrs.ravel())
    if not src:
        return EdgeSet.empty(n)
    return EdgeSet.from_pairs(n, np.concatenate(src), np.concatenate(dst))


def _make_exemplar_model(kind, A, score, fraction, budget, params) -> NodeWeightModel:
    exemplars = top_fraction(score, fraction)
    if exemplars.size < budget:
        params = params | {"truncated_budget": int(exemplars.size)}
    adj = _exemplar_adjacency(A, exemplars, budget)
    return NodeWeightModel(kind, A.node_count, adjacency=adj, exemplars=exemplars,
                           params=params | {"fraction": fraction, "budget": budget})


def make_activity_net(A: AttributeMatrix, fraction: float = DEFAULT_FRACTION,
                      budget: int = DEFAULT_BUDGET) -> NodeWeightModel:
    return _make_exemplar_model("activity_net", A, A.nnz_per_row(), fraction, budget, {})


def make_degree_net(E: EdgeSet, A: AttributeMatrix, fraction: float = DEFAULT_FRACTION,
                    budget: int = DEFAULT_BUDGET, mode: str = "total") -> NodeWeightModel:
    return _make_exemplar_model("degree_net", A, E.degree(mode), fraction, budget, {"degree_mode": mode})


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def _rng(seed: int, i: int, k: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(i), int(k)])


def _bfs(adj: EdgeSet, i: int, k: int, rng: np.random.Generator) -> np.ndarray:
    seen = {i}
    out: list[int] = []
    frontier = [i]
    while frontier and len(out) < k:
        level = []
        for u in frontier:
            for v in adj.out_neighbors(u).tolist():
                if v not in seen:
                    seen.add(v)
                    level.append(v)
        level = rng.permutation(np.array(level, dtype=np.int64)).tolist() if level else []
        out.extend(level[: k - len(out)])
        frontier = level
    return np.array(out, dtype=np.int64)


def sample_subset(W: NodeWeightModel, i: int, k: int, seed: int) -> np.ndarray:
    """Training subset for node ``i`` of size ``min(k, available)``, never containing ``i``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    rng = _rng(seed, i, k)
    if W.kind in ADJACENCY_KINDS:
        return _bfs(W.adjacency, i, k, rng)
    support = W.support
    values = np.asarray(W.values)
    if W.kind == "cluster":
        pos = np.searchsorted(support, i)
        if pos >= support.size or support[pos] != i:
            return np.zeros(0, dtype=np.int64)
        members = support[(values == values[pos]) & (support != i)]
        return rng.permutation(members)[:k].astype(np.int64)
    keep = (values > 0) & (support != i)
    pool = support[keep]
    if pool.size == 0:
        return np.zeros(0, dtype=np.int64)
    # exponential race: identical in law to sequential draws with renormalisation
    keys = rng.exponential(size=pool.size) / values[keep]
    take = np.argsort(keys, kind="stable")[:k]
    return pool[take].astype(np.int64)


def reach_set(subsets, eval_nodes=()) -> np.ndarray:
    """Sorted union of every training subset and every evaluation node."""
    parts = [np.asarray(u, dtype=np.int64).ravel() for u in subsets]
    parts.append(np.asarray(list(eval_nodes), dtype=np.int64).ravel())
    return np.unique(np.concatenate(parts))


def restrict_representation(W: NodeWeightModel, R) -> NodeWeightModel:
    """Keep only entries for reached nodes; adjacencies become induced subgraphs."""
    R = np.unique(np.asarray(R, dtype=np.int64))
    keep = np.isin(W.support, R)
    support = W.support[keep]
    if W.kind in LIST_KINDS:
        return replace(W, support=support, values=np.asarray(W.values)[keep])
    inside = np.zeros(W.node_count, dtype=bool)
    inside[support] = True
    pairs = W.adjacency.pairs()
    mask = inside[pairs[:, 0]] & inside[pairs[:, 1]]
    adj = EdgeSet.from_pairs(W.node_count, pairs[mask, 0], pairs[mask, 1], directed=W.adjacency.directed)
    return replace(W, support=support, adjacency=adj)
