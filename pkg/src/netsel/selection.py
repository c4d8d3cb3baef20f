"""Model ranking and selection, rank-stability statistics, the
efficiency significance score and the rewiring noise sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels

METRICS = ("precision", "efficiency", "correct")


@dataclass(frozen=True)
class ModelScore:
    model_id: str
    precision: float
    correct: float = 0.0
    taskcost: float = 0.0
    netcost: float = 0.0
    efficiency: float = 0.0
    partition: str = "validation"
    network: str = ""
    weighting: str = ""
    predictor: str = ""
    task: str = ""
    k: int | None = None
    mean_kappa: float = 0.0

    def __post_init__(self):
        if not 0 <= self.precision <= 1:
            raise ValueError(f"{self.model_id}: precision {self.precision} outside [0, 1]")
        if self.efficiency < 0:
            raise ValueError(f"{self.model_id}: negative efficiency")

    @property
    def total_cost(self) -> float:
        return self.taskcost + self.netcost

    def metric(self, name: str) -> float:
        if name not in METRICS:
            raise ValueError(f"unknown metric {name!r}")
        return float(getattr(self, name))


@dataclass(frozen=True)
class Ranking:
    model_ids: tuple
    metric: str
    values: tuple = ()

    def __len__(self):
        return len(self.model_ids)

    def position(self, model_id: str) -> int:
        return self.model_ids.index(model_id)

    def top(self, k: int) -> tuple:
        return self.model_ids[:k]


def _value(s, metric):
    return s.metric(metric) if isinstance(s, ModelScore) else float(s[1])


def _id(s):
    return s.model_id if isinstance(s, ModelScore) else s[0]


def rank_models(scores, metric: str = "precision") -> Ranking:
    """Descending by metric, ties by ascending model id.

    ``scores`` holds ModelScore objects or ``(model_id, value)`` pairs.
    """
    items = sorted(((_id(s), _value(s, metric)) for s in scores), key=lambda t: (-t[1], t[0]))
    ids = tuple(m for m, _ in items)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate model ids in score table")
    return Ranking(ids, metric, tuple(v for _, v in items))


def select_best(scores, metric: str = "precision") -> str:
    scores = list(scores)
    if not scores:
        raise ValueError("cannot select from an empty score table")
    return rank_models(scores, metric).model_ids[0]


# --------------------------------------------------------------------------
# consistency
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Consistency:
    selected: str
    mu: float
    mu_top: float
    p_best: float
    p_selected: float
    delta_p: float
    rank: float
    bold: bool | None


def consistency_stats(test_scores, selected: str, metric: str = "precision", top: int = 10) -> Consistency:
    """Test-partition consistency of the model chosen in validation.

    ``rank`` is 1 for the test-best model and ``1/N`` for the test-worst;
    ``bold`` is ``None`` when the best and the mean coincide.
    """
    ranking = rank_models(test_scores, metric)
    values = dict(zip(ranking.model_ids, ranking.values))
    if selected not in values:
        raise KeyError(f"selected model {selected!r} has no test score")
    n = len(ranking)
    vals = np.array(ranking.values, dtype=np.float64)
    mu = float(np.mean(vals))
    p1 = float(vals[0])
    ps = values[selected]
    delta = ps - p1
    rank = (n - ranking.position(selected)) / n
    lift = p1 - mu
    bold = None if lift <= 0 else abs(delta) / lift <= 0.05
    return Consistency(selected, mu, float(np.mean(vals[:top])), p1, ps, delta, rank, bold)


# --------------------------------------------------------------------------
# rank correlation
# --------------------------------------------------------------------------


def _tie_terms(x: np.ndarray) -> tuple[float, float, float]:
    _, cnt = np.unique(x, return_counts=True)
    cnt = cnt[cnt > 1].astype(np.float64)
    return (float(np.sum(cnt * (cnt - 1) / 2)), float(np.sum(cnt * (cnt - 1) * (cnt - 2))),
            float(np.sum(cnt * (cnt - 1) * (2 * cnt + 5))))


def kendall_tau(x, y) -> tuple[float, float]:
    """Tau-b between paired values, with a two-sided normal-approximation p-value."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n != y.size:
        raise ValueError("paired sequences differ in length")
    if n < 2:
        raise ValueError("need at least two items")
    con, dis, _, _ = kernels.pair_counts(x, y)
    tot = n * (n - 1) / 2
    xt, x0, x1 = _tie_terms(x)
    yt, y0, y1 = _tie_terms(y)
    if xt == tot or yt == tot:
        return math.nan, math.nan
    s = con - dis
    tau = s / math.sqrt(tot - xt) / math.sqrt(tot - yt)
    m = n * (n - 1)
    var = (m * (2 * n + 5) - x1 - y1) / 18 + 2 * xt * yt / m
    if n > 2:
        var += x0 * y0 / (9 * m * (n - 2))
    p = math.erfc(abs(s) / math.sqrt(var) / math.sqrt(2)) if var > 0 else 1.0
    return float(tau), float(min(1.0, p))


def ranking_tau(a: Ranking | Sequence[str], b: Ranking | Sequence[str], top: int | None = None):
    """Tau between two orderings of the same ids; ``top`` restricts to the first ids of ``a``."""
    ids_a = list(a.model_ids if isinstance(a, Ranking) else a)
    ids_b = list(b.model_ids if isinstance(b, Ranking) else b)
    if set(ids_a) != set(ids_b):
        raise ValueError("rankings cover different model sets")
    keep = ids_a if top is None else ids_a[:top]
    pos_b = {m: i for i, m in enumerate(ids_b)}
    return kendall_tau(range(len(keep)), [pos_b[m] for m in keep])


def topk_intersection(a, b, k: int = 10) -> int:
    ids_a = a.model_ids if isinstance(a, Ranking) else tuple(a)
    ids_b = b.model_ids if isinstance(b, Ranking) else tuple(b)
    return len(set(ids_a[:k]) & set(ids_b[:k]))


# --------------------------------------------------------------------------
# match / mismatch
# --------------------------------------------------------------------------


def match_mismatch_delta(scores, grouping: str | Callable = "weighting", metric: str = "precision") -> float:
    """Median absolute metric gap over same-group pairs minus that over cross-group pairs."""
    key = grouping if callable(grouping) else (lambda s: getattr(s, grouping))
    scores = list(scores)
    matched, mismatched = [], []
    for a, b in combinations(scores, 2):
        d = abs(a.metric(metric) - b.metric(metric))
        (matched if key(a) == key(b) else mismatched).append(d)
    if not matched:
        raise ValueError("grouping leaves no matched pairs")
    if not mismatched:
        raise ValueError("grouping needs at least two groups")
    return float(np.median(matched) - np.median(mismatched))


# --------------------------------------------------------------------------
# cross-task
# --------------------------------------------------------------------------


@dataclass
class CrossTask:
    rows: list
    cols: list
    cells: dict
    excluded: list = field(default_factory=list)


def cross_task_matrix(validation: Mapping[str, Mapping[str, float]],
                      testing: Mapping[str, Mapping[str, float]]) -> CrossTask:
    """Select on each task's validation precision (and on the task average),
    then report ``(delta_p, rank)`` on every task in test.

    Inputs map task -> {base model id: precision}. Models lacking any task
    score in either partition are excluded and listed.
    """
    tasks = sorted(validation)
    if len(tasks) < 1 or sorted(testing) != tasks:
        raise ValueError("validation and testing must cover the same tasks")
    every = set().union(*(validation[t].keys() for t in tasks), *(testing[t].keys() for t in tasks))
    common = set.intersection(*(set(validation[t]) for t in tasks), *(set(testing[t]) for t in tasks))
    excluded = sorted(every - common)
    if not common:
        raise ValueError("no model is scored on every task")
    models = sorted(common)
    rows = tasks + (["avg"] if len(tasks) > 1 else [])
    cells = {}
    for row in rows:
        if row == "avg":
            sel_scores = [(m, math.fsum(validation[t][m] for t in tasks) / len(tasks)) for m in models]
        else:
            sel_scores = [(m, validation[row][m]) for m in models]
        chosen = select_best(sel_scores)
        for col in tasks:
            c = consistency_stats([(m, testing[col][m]) for m in models], chosen)
            cells[(row, col)] = (c.delta_p, c.rank, chosen)
    return CrossTask(rows, tasks, cells, excluded)


# --------------------------------------------------------------------------
# significance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Significance:
    target: str
    score: float
    significant: bool
    degenerate: bool = False


def _quartile_spread(v: np.ndarray) -> float:
    q1, q3 = np.percentile(v, [25, 75], method="linear")
    return float(q3 - q1)


def significance(efficiencies: Mapping[str, float], target: str, lam: float = 1.0) -> Significance:
    """Robust z-like score of ``target``'s efficiency against the field.

    ``(median_i |e_r - e_i| - median_{i != j} |e_i - e_j|) / IQR_{i != j} |e_i - e_j|``
    over the other models, negated when ``e_r`` is below their median.
    """
    if target not in efficiencies:
        raise KeyError(target)
    e_r = float(efficiencies[target])
    others = np.array([float(v) for m, v in sorted(efficiencies.items()) if m != target])
    if others.size < 3:
        raise ValueError("need at least three competing models")
    to_r = np.abs(e_r - others)
    diff = np.abs(others[:, None] - others[None, :])
    pairwise = diff[~np.eye(others.size, dtype=bool)]
    num = float(np.median(to_r) - np.median(pairwise))
    iqr = _quartile_spread(pairwise)
    degenerate = iqr == 0
    if degenerate:
        score = math.copysign(math.inf, num) if num else 0.0
    else:
        score = num / iqr
    if e_r < float(np.median(others)):
        score = -abs(score)
    return Significance(target, score, bool(score >= lam), degenerate)


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NoisePoint:
    p: float
    efficiency: float
    significance: float
    significant: bool


def noise_sweep(target: str, efficiencies: Mapping[str, float], p_levels,
                evaluate: Callable[[float], float], lam: float = 1.0) -> list[NoisePoint]:
    """Re-score ``target`` at each rewiring level while competitors stay intact.

    ``evaluate(p)`` reruns the target's evaluation on its rewired
    representation and returns the new efficiency; whether the target can be
    rewired at all is the caller's check.
    """
    out = []
    for p in p_levels:
        e = float(evaluate(float(p)))
        field_ = dict(efficiencies)
        field_[target] = e
        sig = significance(field_, target, lam)
        out.append(NoisePoint(float(p), e, sig.score, sig.significant))
    return out


# --------------------------------------------------------------------------
# efficiency comparison
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EfficiencyComparison:
    selected: str
    best: str
    efficiency_ratio: float
    cost_ratio: float
    correct_ratio: float


def efficiency_table(validation, testing, top: int = 3) -> list[EfficiencyComparison]:
    """The ``top`` models by validation efficiency against the test model with
    the most correct predictions, compared on test efficiency, total encoding
    cost and correct count."""
    test = {s.model_id: s for s in testing}
    best = test[select_best(testing, "correct")]
    rows = []
    for m in rank_models(validation, "efficiency").top(top):
        s = test[m]
        rows.append(EfficiencyComparison(
            m, best.model_id,
            s.efficiency / best.efficiency if best.efficiency else math.nan,
            s.total_cost / best.total_cost if best.total_cost else math.nan,
            s.correct / best.correct if best.correct else math.nan))
    return rows
