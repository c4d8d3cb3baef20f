"""Event-log ingestion, temporal partitions, attribute matrices and label sets.

A raw log is a table of ``node,item,value,timestamp`` rows (user, artist,
play count, time). Everything downstream works on dense 0-based ids; the
original ids are kept on the :class:`EventLog` so reports can map back.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

if TYPE_CHECKING:
    from .netinfer import EdgeSet

COLUMNS = ("node", "item", "value", "timestamp")
PARTITIONS = ("validation", "training", "testing")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EventLog:
    nodes: np.ndarray
    items: np.ndarray
    values: np.ndarray
    times: np.ndarray
    node_count: int
    item_count: int
    node_ids: tuple = ()
    item_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(self.nodes, np.int64))
        object.__setattr__(self, "items", _frozen(self.items, np.int64))
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        object.__setattr__(self, "times", _frozen(self.times, np.int64))
        n = len(self.nodes)
        if not (len(self.items) == len(self.values) == len(self.times) == n):
            raise ValueError("event columns have different lengths")
        if n:
            if self.nodes.min() < 0 or self.nodes.max() >= self.node_count:
                raise ValueError("node id out of range")
            if self.items.min() < 0 or self.items.max() >= self.item_count:
                raise ValueError("item id out of range")
            if not np.all(np.isfinite(self.values)) or self.values.min() < 0:
                raise ValueError("event values must be finite and non-negative")

    def __len__(self):
        return len(self.nodes)

    def subset(self, mask) -> "EventLog":
        return EventLog(self.nodes[mask], self.items[mask], self.values[mask], self.times[mask],
                        self.node_count, self.item_count, self.node_ids, self.item_ids)


@dataclass(frozen=True)
class AttributeMatrix:
    """Per-node sparse attribute rows backed by a CSR matrix with sorted indices."""

    csr: sp.csr_matrix

    @property
    def node_count(self) -> int:
        return self.csr.shape[0]

    @property
    def item_count(self) -> int:
        return self.csr.shape[1]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.csr.indptr[i], self.csr.indptr[i + 1]
        return self.csr.indices[lo:hi], self.csr.data[lo:hi]

    def nnz_per_row(self) -> np.ndarray:
        return np.diff(self.csr.indptr).astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, AttributeMatrix):
            return NotImplemented
        a, b = self.csr, other.csr
        return (a.shape == b.shape and np.array_equal(a.indptr, b.indptr)
                and np.array_equal(a.indices, b.indices) and np.array_equal(a.data, b.data))

    __hash__ = None


@dataclass(frozen=True)
class LabelSet:
    name: str
    positives: frozenset

    def mask(self, node_count: int) -> np.ndarray:
        m = np.zeros(node_count, dtype=bool)
        if self.positives:
            m[np.fromiter(self.positives, dtype=np.int64)] = True
        return m

    def sorted(self) -> np.ndarray:
        return np.array(sorted(self.positives), dtype=np.int64)


@dataclass(frozen=True)
class Dataset:
    partitions: tuple
    label_sets: tuple
    node_count: int
    explicit_edges: "EdgeSet | None" = None
    communities: np.ndarray | None = None
    node_ids: tuple = ()
    item_ids: tuple = ()

    def __post_init__(self):
        if len(self.partitions) != 3 or len(self.label_sets) != 3:
            raise ValueError("a dataset has exactly three partitions")
        for part in self.partitions:
            if part.node_count != self.node_count:
                raise ValueError("partitions disagree on node_count")

    def partition(self, name: str) -> AttributeMatrix:
        return self.partitions[PARTITIONS.index(name)]

    def labels(self, name: str) -> tuple:
        return self.label_sets[PARTITIONS.index(name)]

    def label(self, partition: str, label_name: str) -> LabelSet:
        for ls in self.labels(partition):
            if ls.name == label_name:
                return ls
        raise KeyError(label_name)

    @property
    def label_names(self) -> list[str]:
        return [ls.name for ls in self.label_sets[0]]


# --------------------------------------------------------------------------
# ingestion
# --------------------------------------------------------------------------


def _sniff_delimiter(header: str) -> str:
    return "\t" if "\t" in header else ","


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        x = float(text)
        if not x.is_integer():
            raise
        return int(x)


def load_events(path, columns: Mapping[str, str] | None = None) -> EventLog:
    """Read a delimited ``node,item,value,timestamp`` file.

    ``columns`` maps the canonical column names onto the header names used
    in the file. Ids are densified in order of first appearance.
    """
    columns = {c: c for c in COLUMNS} | dict(columns or {})
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            return EventLog([], [], [], [], 0, 0)
        delim = _sniff_delimiter(header)
        names = [h.strip() for h in next(csv.reader([header], delimiter=delim))]
        try:
            pos = [names.index(columns[c]) for c in COLUMNS]
        except ValueError as exc:
            raise ValueError(f"{path}: header {names} lacks a required column") from exc
        node_map: dict[str, int] = {}
        item_map: dict[str, int] = {}
        nodes, items, values, times = [], [], [], []
        for lineno, row in enumerate(csv.reader(fh, delimiter=delim), start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                node, item, value, ts = (row[p].strip() for p in pos)
                value = float(value)
                ts = _parse_int(ts)
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse row {row!r}") from exc
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{path}:{lineno}: value must be finite and non-negative, got {value}")
            nodes.append(node_map.setdefault(node, len(node_map)))
            items.append(item_map.setdefault(item, len(item_map)))
            values.append(value)
            times.append(ts)
    return EventLog(nodes, items, values, times, len(node_map), len(item_map),
                    tuple(node_map), tuple(item_map))


def write_id_map(path, ids: Sequence[str]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["original_id", "dense_id"])
        for dense, orig in enumerate(ids):
            w.writerow([orig, dense])


def load_item_groups(path, item_ids: Sequence[str]) -> dict[str, frozenset]:
    """Read ``group,item`` pairs; items never seen in the log are ignored."""
    lookup = {orig: dense for dense, orig in enumerate(item_ids)}
    groups: dict[str, set] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        header = fh.readline()
        delim = _sniff_delimiter(header)
        for lineno, row in enumerate(csv.reader(fh, delimiter=delim), start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: expected group,item")
            g, item = row[0].strip(), row[1].strip()
            members = groups.setdefault(g, set())
            if item in lookup:
                members.add(lookup[item])
    return {g: frozenset(s) for g, s in groups.items()}


def limit_group_items(groups: Mapping[str, Iterable[int]], log: EventLog, top_n: int) -> dict[str, frozenset]:
    """Keep each group's ``top_n`` items by event count in ``log`` (ties to lower id)."""
    freq = np.bincount(log.items, minlength=log.item_count)
    out = {}
    for g, items in groups.items():
        items = sorted(items)
        items.sort(key=lambda j: -freq[j])
        out[g] = frozenset(items[:top_n])
    return out


# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------


def temporal_split(log: EventLog, fractions=(1 / 3, 1 / 3, 1 / 3), span=None):
    """Cut the log into validation / training / testing by time span.

    Integer timestamps are treated as unit intervals, so the span of a log
    covering ``t = 0..99`` is 100 seconds. ``span=(start, end)`` overrides
    the observed extent.
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.shape != (3,) or np.any(fractions < 0) or not np.isclose(fractions.sum(), 1.0):
        raise ValueError("fractions must be three non-negative numbers summing to 1")
    if len(log) == 0:
        raise ValueError("cannot split an empty log")
    if span is None:
        if log.times.min() == log.times.max() and len(log) > 1:
            raise ValueError("all timestamps are equal; the log has no temporal extent")
        start, end = float(log.times.min()), float(log.times.max()) + 1.0
    else:
        start, end = map(float, span)
    cuts = start + np.cumsum(fractions)[:2] * (end - start)
    bucket = np.searchsorted(cuts, log.times, side="right")
    return tuple(log.subset(bucket == b) for b in range(3))


def build_attributes(log: EventLog) -> AttributeMatrix:
    """Sum event values per (node, item) into a CSR matrix."""
    order = np.lexsort((log.values, log.items, log.nodes))
    m = sp.coo_matrix((log.values[order], (log.nodes[order], log.items[order])),
                      shape=(log.node_count, log.item_count)).tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return AttributeMatrix(m)


def build_labels(log: EventLog, item_groups: Mapping[str, Iterable[int]],
                 value_threshold: float = 5, item_threshold: int = 5) -> list[LabelSet]:
    """Mark node ``i`` positive for group ``g`` when at least ``item_threshold``
    items of ``g`` have total value ``>= value_threshold`` for ``i``."""
    if not item_groups:
        raise ValueError("item_groups is empty")
    totals = build_attributes(log).csr
    qualifies = (totals >= value_threshold).tocsc()
    out = []
    for name, items in item_groups.items():
        cols = np.array(sorted(items), dtype=np.int64)
        if cols.size == 0:
            out.append(LabelSet(name, frozenset()))
            continue
        hits = np.asarray(qualifies[:, cols].sum(axis=1)).ravel()
        out.append(LabelSet(name, frozenset(np.flatnonzero(hits >= item_threshold).tolist())))
    return out


# --------------------------------------------------------------------------
# planted synthetic data
# --------------------------------------------------------------------------


def generate_synthetic(node_count: int, community_count: int, intra_affinity: float,
                       label_noise: float, seed: int, items_per_community: int = 50,
                       mean_events: float = 15.0, horizon: int = 3000) -> Dataset:
    """Planted-community dataset.

    Each community owns a disjoint block of items whose first item is its
    anchor. Every node gets one anchor event in each third of the horizon,
    then a heavy-tailed number of extra events that land in its own block
    with probability ``intra_affinity`` and uniformly on other blocks
    otherwise. Labels are community memberships with independent flips at
    rate ``label_noise`` in each partition.
    """
    if not (1 <= community_count <= node_count):
        raise ValueError("need 1 <= community_count <= node_count")
    if not (0 < intra_affinity <= 1):
        raise ValueError("intra_affinity must be in (0, 1]")
    if not (0 <= label_noise < 1):
        raise ValueError("label_noise must be in [0, 1)")
    if items_per_community < 1 or mean_events <= 0 or horizon < 3:
        raise ValueError("invalid generator size parameters")

    rng = np.random.default_rng(seed)
    n, c, b = node_count, community_count, items_per_community
    community = rng.permutation(np.arange(n) % c)
    extra = np.maximum(1, np.round(rng.lognormal(np.log(mean_events), 0.6, size=n))).astype(np.int64)

    third = horizon / 3.0
    a_nodes = np.repeat(np.arange(n), 3)
    a_items = community[a_nodes] * b
    a_times = np.floor((np.tile(np.arange(3), n) + rng.uniform(0.1, 0.9, size=3 * n)) * third)

    e_nodes = np.repeat(np.arange(n), extra)
    own = rng.random(e_nodes.size) < intra_affinity
    offset = rng.integers(b, size=e_nodes.size)
    if c > 1:
        other = rng.integers(c - 1, size=e_nodes.size)
        other += other >= community[e_nodes]
    else:
        other = np.zeros(e_nodes.size, dtype=np.int64)
    block = np.where(own, community[e_nodes], other)
    e_items = block * b + offset
    e_times = rng.integers(horizon, size=e_nodes.size)

    nodes = np.concatenate([a_nodes, e_nodes])
    items = np.concatenate([a_items, e_items])
    times = np.concatenate([a_times, e_times]).astype(np.int64)
    values = 1.0 + rng.poisson(2.0, size=nodes.size)
    order = np.lexsort((items, nodes, times))
    log = EventLog(nodes[order], items[order], values[order], times[order], n, c * b,
                   tuple(str(i) for i in range(n)), tuple(str(j) for j in range(c * b)))

    parts = temporal_split(log, span=(0, horizon))
    matrices = tuple(build_attributes(p) for p in parts)
    labels = []
    for _ in PARTITIONS:
        flips = rng.random((c, n)) < label_noise
        sets = []
        for g in range(c):
            member = (community == g) ^ flips[g]
            sets.append(LabelSet(f"community_{g}", frozenset(np.flatnonzero(member).tolist())))
        labels.append(tuple(sets))
    return Dataset(matrices, tuple(labels), n, None, _frozen(community, np.int64),
                   log.node_ids, log.item_ids)


def dataset_from_log(log: EventLog, item_groups: Mapping[str, Iterable[int]],
                     fractions=(1 / 3, 1 / 3, 1 / 3), value_threshold: float = 5,
                     item_threshold: int = 5, explicit_edges=None) -> Dataset:
    parts = temporal_split(log, fractions)
    matrices = tuple(build_attributes(p) for p in parts)
    labels = tuple(tuple(build_labels(p, item_groups, value_threshold, item_threshold)) for p in parts)
    if any(not ls.positives for ls in labels[0]):
        warnings.warn("some label sets have no positives in the validation partition")
    return Dataset(matrices, labels, log.node_count, explicit_edges, None, log.node_ids, log.item_ids)
