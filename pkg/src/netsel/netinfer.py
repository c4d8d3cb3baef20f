"""Edge-set construction: KNN and threshold similarity networks, explicit
edge lists, and out-degree-preserving rewiring."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from . import kernels
from .dataset import AttributeMatrix

# similarities are compared after rounding; what is left tied goes to the lower id
SIM_DECIMALS = 10

DENSITIES = {"dense": 0.01, "sparse": 0.0025}


@dataclass(frozen=True)
class EdgeSet:
    """Directed adjacency in CSR form; out-lists sorted, no loops, no duplicates."""

    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    directed: bool = True

    def __post_init__(self):
        indptr = np.array(self.indptr, dtype=np.int64)
        indices = np.array(self.indices, dtype=np.int64)
        indptr.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @classmethod
    def from_pairs(cls, node_count: int, src, dst, directed: bool = True) -> "EdgeSet":
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        keep = src != dst
        src, dst = src[keep], dst[keep]
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= node_count):
            raise ValueError("edge endpoint outside node range")
        key = np.unique(src * node_count + dst)
        src, dst = np.divmod(key, node_count) if node_count else (key, key)
        indptr = np.zeros(node_count + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=node_count), out=indptr[1:])
        return cls(node_count, indptr, dst, directed)

    @classmethod
    def empty(cls, node_count: int, directed: bool = True) -> "EdgeSet":
        return cls(node_count, np.zeros(node_count + 1, np.int64), np.zeros(0, np.int64), directed)

    @property
    def edge_count(self) -> int:
        return int(self.indptr[-1])

    def out_neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.node_count).astype(np.int64)

    def degree(self, mode: str = "total") -> np.ndarray:
        if mode == "out":
            return self.out_degree()
        if mode == "in":
            return self.in_degree()
        if mode == "total":
            return self.out_degree() + self.in_degree()
        raise ValueError(f"unknown degree mode {mode!r}")

    def sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.node_count, dtype=np.int64), self.out_degree())

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.sources(), self.indices])

    def undirected_pairs(self) -> np.ndarray:
        """Unique ``(u, v)`` with ``u < v`` for every edge in either direction."""
        p = np.sort(self.pairs(), axis=1)
        return np.unique(p, axis=0) if len(p) else p.reshape(0, 2)

    def adjacency_lists(self) -> list[list[int]]:
        return [self.out_neighbors(i).tolist() for i in range(self.node_count)]

    def to_csr(self) -> sp.csr_matrix:
        data = np.ones(self.edge_count, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.node_count,) * 2)

    def __eq__(self, other):
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return (self.node_count == other.node_count and self.directed == other.directed
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    __hash__ = None


@dataclass(frozen=True)
class NetworkModelSpec:
    kind: str
    rho: int | None = None
    density: str | None = None
    similarity: str = "cosine"
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("knn", "threshold", "explicit"):
            raise ValueError(f"unknown network kind {self.kind!r}")
        if self.similarity != "cosine":
            raise ValueError("only cosine similarity is supported")
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.kind != "explicit" and self.rho is None and self.density not in DENSITIES:
            raise ValueError("similarity networks need rho or a density label (dense/sparse)")

    @property
    def name(self) -> str:
        if self.kind == "explicit":
            return "social"
        label = self.density if self.density else f"rho{self.rho}"
        return f"{self.kind}_{label}"

    def edge_budget(self, node_count: int) -> int:
        if self.rho is not None:
            return int(self.rho)
        return int(round(DENSITIES[self.density] * node_count * node_count))


# --------------------------------------------------------------------------
# similarity
# --------------------------------------------------------------------------


def _as_pairs(v) -> dict:
    if isinstance(v, Mapping):
        return {int(k): float(x) for k, x in v.items()}
    return {int(k): float(x) for k, x in v}


def cosine_similarity(a, b) -> float:
    """Cosine of two sparse vectors given as ``{item: value}`` or ``(item, value)`` pairs."""
    a, b = _as_pairs(a), _as_pairs(b)
    na = math.sqrt(math.fsum(x * x for x in a.values()))
    nb = math.sqrt(math.fsum(x * x for x in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    dot = math.fsum(x * b[k] for k, x in a.items() if k in b)
    return dot / (na * nb)


def _normalized(A: AttributeMatrix) -> sp.csr_matrix:
    X = A.csr.astype(np.float64)
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return sp.diags(inv) @ X


def cosine_matrix(A: AttributeMatrix, rows=None, cols=None) -> np.ndarray:
    """Dense rounded cosine similarities between ``rows`` and ``cols`` (all nodes by default)."""
    Xn = _normalized(A).tocsr()
    R = Xn if rows is None else Xn[np.asarray(rows)]
    C = Xn if cols is None else Xn[np.asarray(cols)]
    S = (R @ C.T).toarray()
    return np.round(S, SIM_DECIMALS)


# --------------------------------------------------------------------------
# network models
# --------------------------------------------------------------------------

_BLOCK = 1024


def knn_lists(A: AttributeMatrix, k: int, cols=None, rows=None) -> np.ndarray:
    """Top-``k`` most similar columns per row, self excluded; ``cols`` restricts candidates.

    Output row ``r`` belongs to ``rows[r]`` (all nodes by default).
    """
    n = A.node_count
    cols = np.arange(n) if cols is None else np.asarray(cols, dtype=np.int64)
    rows = np.arange(n) if rows is None else np.asarray(rows, dtype=np.int64)
    col_pos = np.full(n, -1, dtype=np.int64)
    col_pos[cols] = np.arange(cols.size)
    out = np.empty((rows.size, k), dtype=np.int64)
    for lo in range(0, rows.size, _BLOCK):
        block = rows[lo:lo + _BLOCK]
        S = cosine_matrix(A, block, cols)
        out[lo:lo + block.size] = cols[kernels.topk_rows(S, k, col_pos[block])]
    return out


def build_knn(A: AttributeMatrix, spec: NetworkModelSpec) -> EdgeSet:
    n = A.node_count
    k = spec.edge_budget(n) // n if n else 0
    k = min(k, max(n - 1, 0))
    if k == 0:
        warnings.warn(f"{spec.name}: floor(rho/|V|) is 0, KNN network is empty")
        return EdgeSet.empty(n, directed=True)
    nbrs = knn_lists(A, k)
    return EdgeSet.from_pairs(n, np.repeat(np.arange(n), k), nbrs.ravel(), directed=True)


def build_threshold(A: AttributeMatrix, spec: NetworkModelSpec) -> EdgeSet:
    n = A.node_count
    budget = min(spec.edge_budget(n), n * (n - 1) // 2)
    if budget == 0:
        return EdgeSet.empty(n, directed=False)
    S = cosine_matrix(A)
    iu, ju = np.triu_indices(n, 1)
    vals = S[iu, ju]
    top = np.lexsort((ju, iu, -vals))[:budget]
    i, j = iu[top], ju[top]
    return EdgeSet.from_pairs(n, np.concatenate([i, j]), np.concatenate([j, i]), directed=False)


def build_network(A: AttributeMatrix, spec: NetworkModelSpec, explicit: EdgeSet | None = None) -> EdgeSet:
    if spec.kind == "knn":
        return build_knn(A, spec)
    if spec.kind == "threshold":
        return build_threshold(A, spec)
    if explicit is None:
        raise ValueError("explicit network requested but none loaded")
    return explicit


def load_explicit(path, id_map: Mapping[str, int] | None = None,
                  node_count: int | None = None) -> tuple[EdgeSet, dict]:
    """Read ``src<TAB>dst`` lines. Returns the edge set and drop counts."""
    if id_map is None and node_count is None:
        raise ValueError("need an id map or a node count")
    n = len(id_map) if id_map is not None else int(node_count)
    src, dst = [], []
    loops = 0
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'src<TAB>dst'")
            ends = []
            for raw in parts:
                raw = raw.strip()
                if id_map is not None:
                    if raw not in id_map:
                        raise ValueError(f"{path}:{lineno}: unknown node id {raw!r}")
                    ends.append(id_map[raw])
                else:
                    try:
                        v = int(raw)
                    except ValueError as exc:
                        raise ValueError(f"{path}:{lineno}: bad node id {raw!r}") from exc
                    if not 0 <= v < n:
                        raise ValueError(f"{path}:{lineno}: node id {v} outside 0..{n - 1}")
                    ends.append(v)
            if ends[0] == ends[1]:
                loops += 1
                continue
            src.append(ends[0])
            dst.append(ends[1])
    edges = EdgeSet.from_pairs(n, src, dst, directed=True)
    return edges, {"self_loops": loops, "duplicates": len(src) - edges.edge_count}


def write_edges(path, edges: EdgeSet, ids: Iterable[str] | None = None) -> None:
    names = list(ids) if ids is not None else None
    with Path(path).open("w", encoding="utf-8") as fh:
        for s, d in edges.pairs():
            if names:
                fh.write(f"{names[s]}\t{names[d]}\n")
            else:
                fh.write(f"{s}\t{d}\n")


def rewire(E: EdgeSet, p: float, seed: int) -> EdgeSet:
    """Retarget each out-edge with probability ``p`` to a uniform node other
    than its source, avoiding duplicates; out-degrees never change."""
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    n = E.node_count
    src, dst = [], []
    for i in range(n):
        out = E.out_neighbors(i).tolist()
        if not out:
            continue
        rng = np.random.default_rng([int(seed), i])
        current = set(out)
        flips = rng.random(len(out)) < p
        for j, flip in zip(out, flips):
            if not flip or len(current) >= n - 1:
                continue
            while True:
                u = int(rng.integers(n - 1))
                u += u >= i
                if u == j or u not in current:
                    break
            current.discard(j)
            current.add(u)
        src.extend([i] * len(current))
        dst.extend(current)
    # a retargeted symmetric edge set is no longer symmetric
    return EdgeSet.from_pairs(n, src, dst, directed=E.directed or p > 0)
