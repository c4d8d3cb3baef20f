"""Per-node task predictors: collective classification (CC) and link
prediction (LP) jobs, bootstrap replication, and precision bookkeeping."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from . import mdl
from .classifiers import Classifier, PredictorSpec, train_classifier
from .dataset import AttributeMatrix, LabelSet
from .netinfer import EdgeSet
from .weights import NodeWeightModel, sample_subset

LP_PAIR_CAP = 200


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any sequence of ints/strings."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big") & (2**63 - 1)


@dataclass(frozen=True)
class EvalOutcome:
    node: int
    predicted: int
    truth: int

    @property
    def correct(self) -> bool:
        return self.predicted == self.truth


def precision(outcomes) -> float:
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("precision of an empty outcome list is undefined")
    return correct_count(outcomes) / len(outcomes)


def correct_count(outcomes) -> int:
    return sum(1 for o in outcomes if o.correct)


@dataclass(frozen=True)
class JobResult:
    """One trained predictor: node ``i`` at subset size ``k``, replicate ``r``.

    ``outcomes`` maps an evaluation partition to the predictions made there;
    partitions where the node is not evaluated are absent.
    """

    node: int
    k: int
    replicate: int
    subset: np.ndarray
    cost: int
    outcomes: Mapping[str, tuple] = field(default_factory=dict)
    skipped: str = ""
    classifier: Classifier | None = field(default=None, compare=False, repr=False)

    def correct(self, partition: str) -> int:
        return correct_count(self.outcomes.get(partition, ()))

    def total(self, partition: str) -> int:
        return len(self.outcomes.get(partition, ()))


@dataclass
class PredictorSet:
    entries: list = field(default_factory=list)

    def add(self, result: JobResult) -> None:
        self.entries.append(result)

    def keys(self) -> list[tuple[int, int, int]]:
        return [(e.node, e.k, e.replicate) for e in self.entries]

    def outcomes(self, partition: str) -> list[EvalOutcome]:
        return [o for e in self.entries for o in e.outcomes.get(partition, ())]

    @property
    def skipped(self) -> list[tuple[int, int, int, str]]:
        return [(e.node, e.k, e.replicate, e.skipped) for e in self.entries if e.skipped]


# --------------------------------------------------------------------------
# collective classification
# --------------------------------------------------------------------------


def cc_job(W: NodeWeightModel, train: AttributeMatrix, train_labels: np.ndarray,
           eval_rows: Mapping[str, sp.csr_matrix], i: int, k: int, spec: PredictorSpec,
           seed: int, replicate: int = 0, keep_classifier: bool = False,
           codec: str = "lz4") -> JobResult:
    """Train node ``i``'s predictor on ``U = sample_subset(W, i, k)`` and ask
    it about ``i`` in every evaluation partition (all true positives)."""
    U = sample_subset(W, i, k, seed)
    if U.size == 0:
        return JobResult(i, k, replicate, U, 0, {}, "empty subset")
    clf = train_classifier(train.csr[U], train_labels[U], spec, derive_seed(seed, "train"))
    outcomes = {part: (EvalOutcome(i, int(clf.predict(row)[0]), 1),) for part, row in eval_rows.items()}
    return JobResult(i, k, replicate, U, mdl.cost(clf, codec), outcomes, "",
                     clf if keep_classifier else None)


def run_cc(W: NodeWeightModel, train: AttributeMatrix, train_labels: LabelSet,
           evaluation: AttributeMatrix, eval_labels: LabelSet, k: int, spec: PredictorSpec,
           seed: int, replicate: int = 0, partition: str = "evaluation"):
    """All positive nodes of ``eval_labels`` as CC jobs at one ``k``.

    Returns the predictor set and the flat outcome list for ``partition``.
    """
    if not eval_labels.positives:
        raise ValueError(f"label set {eval_labels.name!r} has no positives to evaluate")
    y = train_labels.mask(train.node_count).astype(np.int64)
    ps = PredictorSet()
    for i in eval_labels.sorted().tolist():
        job_seed = derive_seed(seed, eval_labels.name, i, k, replicate)
        ps.add(cc_job(W, train, y, {partition: evaluation.csr[i]}, i, k, spec, job_seed,
                      replicate, keep_classifier=True))
    return ps, ps.outcomes(partition)


# --------------------------------------------------------------------------
# link prediction
# --------------------------------------------------------------------------


def egonet(E: EdgeSet, i: int) -> np.ndarray:
    return np.unique(np.concatenate([[i], E.out_neighbors(i)])).astype(np.int64)


def egonet_pairs(E: EdgeSet, i: int, rng: np.random.Generator, cap: int = LP_PAIR_CAP):
    """Balanced ``(positives, negatives)`` unordered pairs for node ``i``'s egonet.

    Positives are egonet pairs joined in either direction. Negatives are
    non-adjacent egonet pairs, topped up with egonet-to-outside non-edges when
    the egonet is too dense to supply enough of them.
    """
    nodes = egonet(E, i)
    inside = set(nodes.tolist())
    adj = {int(u): set(E.out_neighbors(u).tolist()) for u in nodes}
    pos, neg = [], []
    for a in range(nodes.size):
        u = int(nodes[a])
        for v in nodes[a + 1:].tolist():
            (pos if v in adj[u] or u in adj[v] else neg).append((u, v))
    pos = np.array(pos, dtype=np.int64).reshape(-1, 2)
    neg = np.array(neg, dtype=np.int64).reshape(-1, 2)
    if len(pos) > cap:
        pos = pos[np.sort(rng.choice(len(pos), cap, replace=False))]
    want = len(pos)
    if len(neg) > want:
        neg = neg[np.sort(rng.choice(len(neg), want, replace=False))]
    need = want - len(neg)
    outside = np.setdiff1d(np.arange(E.node_count), nodes)
    if need > 0 and outside.size:
        csr = E.to_csr()
        linked = csr[nodes][:, outside] + csr[outside][:, nodes].T
        free_u, free_w = np.nonzero(linked.toarray() == 0)
        if free_u.size:
            take = np.sort(rng.choice(free_u.size, min(need, free_u.size), replace=False))
            u, w = nodes[free_u[take]], outside[free_w[take]]
            extra = np.column_stack([np.minimum(u, w), np.maximum(u, w)])
            neg = np.concatenate([neg, extra.astype(np.int64)])
    return pos, neg


def pair_features(A: AttributeMatrix, pairs: np.ndarray, signed: bool = False) -> sp.csr_matrix:
    """Rows of ``|a_u - a_v|`` (or the signed difference) for each pair."""
    if len(pairs) == 0:
        return sp.csr_matrix((0, A.item_count))
    D = A.csr[pairs[:, 0]] - A.csr[pairs[:, 1]]
    D = sp.csr_matrix(D)
    if not signed:
        D = abs(D)
    D.eliminate_zeros()
    D.sort_indices()
    return D


def lp_job(train_net: EdgeSet, train: AttributeMatrix,
           eval_nets: Mapping[str, tuple[EdgeSet, AttributeMatrix]], i: int, spec: PredictorSpec,
           seed: int, replicate: int = 0, cap: int = LP_PAIR_CAP, signed: bool = False,
           keep_classifier: bool = False, codec: str = "lz4") -> JobResult:
    """Edge/non-edge predictor for node ``i`` trained on its training egonet,
    tested on its egonet in each evaluation partition's network."""
    rng = np.random.default_rng(derive_seed(seed, "pairs"))
    pos, neg = egonet_pairs(train_net, i, rng, cap)
    members = egonet(train_net, i)
    if len(pos) < 2:
        return JobResult(i, 0, replicate, members, 0, {}, "fewer than 2 egonet edges")
    X = sp.vstack([pair_features(train, pos, signed), pair_features(train, neg, signed)]).tocsr()
    y = np.r_[np.ones(len(pos), np.int64), np.zeros(len(neg), np.int64)]
    clf = train_classifier(X, y, spec, derive_seed(seed, "train"))
    outcomes = {}
    for part, (net, attrs) in eval_nets.items():
        tpos, tneg = egonet_pairs(net, i, rng, cap)
        if len(tpos) < 2:
            continue
        pairs = np.concatenate([tpos, tneg])
        truth = np.r_[np.ones(len(tpos), np.int64), np.zeros(len(tneg), np.int64)]
        pred = clf.predict(pair_features(attrs, pairs, signed))
        outcomes[part] = tuple(EvalOutcome(i, int(p), int(t)) for p, t in zip(pred, truth))
    return JobResult(i, 0, replicate, members, mdl.cost(clf, codec), outcomes,
                     "" if outcomes else "no evaluable test egonet",
                     clf if keep_classifier else None)


def run_lp(train_net: EdgeSet, train: AttributeMatrix, eval_net: EdgeSet, evaluation: AttributeMatrix,
           nodes, spec: PredictorSpec, seed: int, replicate: int = 0, partition: str = "evaluation"):
    if train_net.edge_count == 0:
        raise ValueError("link prediction needs a non-empty edge set")
    ps = PredictorSet()
    for i in sorted(int(v) for v in nodes):
        ps.add(lp_job(train_net, train, {partition: (eval_net, evaluation)}, i, spec,
                      derive_seed(seed, "lp", i, replicate), replicate, keep_classifier=True))
    return ps, ps.outcomes(partition)


# --------------------------------------------------------------------------
# bootstrap
# --------------------------------------------------------------------------


def coefficient_of_variation(values) -> tuple[float, bool]:
    """``(sigma / mu, defined)``; a single value or an all-zero series gives ``(0, False)``."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0, False
    mu = float(np.mean(v))
    sigma = float(np.std(v))
    if sigma == 0:
        return 0.0, True
    if mu == 0:
        return math.inf, False
    return sigma / abs(mu), True


@dataclass(frozen=True)
class BootstrapSummary:
    precision: np.ndarray
    cost: np.ndarray
    median_precision: float
    median_cost: float
    cv_precision: float
    cv_cost: float
    cv_defined: bool


def bootstrap_eval(job: Callable[[int], tuple[float, float]], b: int = 20) -> BootstrapSummary:
    """Run ``job(replicate)`` for ``b`` replicates, each returning ``(precision, cost)``."""
    if b < 1:
        raise ValueError("need at least one replicate")
    pairs = np.array([job(r) for r in range(b)], dtype=np.float64).reshape(b, 2)
    cvp, okp = coefficient_of_variation(pairs[:, 0])
    cvc, okc = coefficient_of_variation(pairs[:, 1])
    return BootstrapSummary(pairs[:, 0], pairs[:, 1], float(np.median(pairs[:, 0])),
                            float(np.median(pairs[:, 1])), cvp, cvc, okp and okc)
