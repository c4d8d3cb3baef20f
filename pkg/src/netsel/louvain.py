"""Louvain modularity optimisation on the undirected projection of an edge set."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import kernels
from .netinfer import EdgeSet


def _projection(E: EdgeSet) -> sp.csr_matrix:
    n = E.node_count
    pairs = E.undirected_pairs()
    if len(pairs) == 0:
        return sp.csr_matrix((n, n))
    u, v = pairs[:, 0], pairs[:, 1]
    data = np.ones(2 * len(pairs))
    A = sp.coo_matrix((data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n)).tocsr()
    A.sort_indices()
    return A


def _dense_labels(comm: np.ndarray) -> np.ndarray:
    _, first = np.unique(comm, return_index=True)
    remap = np.empty(comm.max() + 1, dtype=np.int64)
    remap[comm[np.sort(first)]] = np.arange(first.size)
    return remap[comm]


def modularity(E: EdgeSet, assignment) -> float:
    A = _projection(E)
    m2 = A.sum()
    if m2 == 0:
        return 0.0
    assignment = np.asarray(assignment)
    strength = np.asarray(A.sum(axis=1)).ravel()
    coo = A.tocoo()
    inside = np.bincount(assignment[coo.row], weights=coo.data * (assignment[coo.row] == assignment[coo.col]),
                         minlength=assignment.max() + 1)
    tot = np.bincount(assignment, weights=strength, minlength=assignment.max() + 1)
    return float(np.sum(inside / m2 - (tot / m2) ** 2))


def louvain(E: EdgeSet, seed: int = 0, tol: float = 1e-9) -> np.ndarray:
    """Community id per node, ids dense from 0 in order of lowest member.

    Local moving passes repeat until no move gains more than ``tol``; the
    graph is then aggregated and the procedure restarts, until a level makes
    no move at all. Visit order is shuffled per level from ``seed``.
    """
    n = E.node_count
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    A = _projection(E)
    rng = np.random.default_rng(seed)
    membership = np.arange(n, dtype=np.int64)
    while True:
        strength = np.asarray(A.sum(axis=1)).ravel()
        m2 = float(strength.sum())
        if m2 == 0:
            break
        size = A.shape[0]
        order = rng.permutation(size).astype(np.int64)
        comm, moved = kernels.louvain_local_move(
            A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data.astype(np.float64),
            strength, np.arange(size, dtype=np.int64), order, m2, tol)
        if not moved:
            break
        comm = _dense_labels(comm)
        membership = comm[membership]
        coo = A.tocoo()
        k = comm.max() + 1
        A = sp.coo_matrix((coo.data, (comm[coo.row], comm[coo.col])), shape=(k, k)).tocsr()
        A.sum_duplicates()
        A.sort_indices()
    return _dense_labels(membership)
