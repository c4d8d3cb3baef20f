import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from netsel.dataset import (EventLog, build_attributes, build_labels, dataset_from_log, generate_synthetic,
                            limit_group_items, load_events, load_item_groups, temporal_split, write_id_map)
from netsel.netinfer import cosine_matrix


def log_of(rows, n=None, m=None):
    nodes, items, values, times = (list(c) for c in zip(*rows)) if rows else ([], [], [], [])
    return EventLog(nodes, items, values, times, n or max(nodes) + 1, m or max(items) + 1)


def test_load_events_densifies_in_first_seen_order(tmp_path):
    p = tmp_path / "log.csv"
    p.write_text("user,artist,plays,ts\nu9,a2,3,10\nu1,a2,1,11\nu9,a7,2.0,12\n\n")
    log = load_events(p, {"node": "user", "item": "artist", "value": "plays", "timestamp": "ts"})
    assert log.node_ids == ("u9", "u1") and log.item_ids == ("a2", "a7")
    assert log.nodes.tolist() == [0, 1, 0] and log.items.tolist() == [0, 0, 1]
    assert log.values.tolist() == [3, 1, 2] and log.times.tolist() == [10, 11, 12]


def test_load_events_tabs_and_errors(tmp_path):
    p = tmp_path / "log.tsv"
    p.write_text("node\titem\tvalue\ttimestamp\na\tb\t1\t5\n")
    assert len(load_events(p)) == 1
    p.write_text("node,item,value,timestamp\na,b,-1,5\n")
    with pytest.raises(ValueError, match="non-negative"):
        load_events(p)
    p.write_text("node,item,value,timestamp\na,b,x,5\n")
    with pytest.raises(ValueError, match=":2:"):
        load_events(p)
    p.write_text("node,item,value\na,b,1\n")
    with pytest.raises(ValueError, match="required column"):
        load_events(p)
    p.write_text("")
    assert len(load_events(p)) == 0


def test_id_map_and_groups(tmp_path):
    write_id_map(tmp_path / "ids.csv", ["x", "y"])
    assert (tmp_path / "ids.csv").read_text() == "original_id,dense_id\nx,0\ny,1\n"
    g = tmp_path / "groups.csv"
    g.write_text("group,item\nrock,a\nrock,b\npop,zzz\n")
    assert load_item_groups(g, ["b", "a"]) == {"rock": frozenset({0, 1}), "pop": frozenset()}


def test_temporal_split_thirds():
    log = log_of([(0, 0, 1, t) for t in range(9)])
    parts = temporal_split(log)
    assert [p.times.tolist() for p in parts] == [[0, 1, 2], [3, 4, 5], [6, 7, 8]]
    with pytest.raises(ValueError):
        temporal_split(log_of([(0, 0, 1, 4), (1, 0, 1, 4)]))
    with pytest.raises(ValueError):
        temporal_split(log, fractions=(0.5, 0.5, 0.5))


@given(st.lists(st.integers(0, 1000), min_size=2, max_size=60))
def test_temporal_split_is_a_partition_in_time_order(times):
    if min(times) == max(times):
        return
    log = log_of([(0, 0, 1, t) for t in times])
    parts = temporal_split(log)
    assert sum(len(p) for p in parts) == len(times)
    for a, b in zip(parts, parts[1:]):
        if len(a) and len(b):
            assert a.times.max() < b.times.min()


def test_build_attributes_sums_duplicates():
    A = build_attributes(log_of([(0, 1, 2, 0), (0, 1, 3, 1), (1, 0, 1, 2)], n=3, m=2))
    assert A.csr.toarray().tolist() == [[0, 5], [1, 0], [0, 0]]
    assert A.nnz_per_row().tolist() == [1, 1, 0]


def test_build_labels_thresholds():
    rows = [(0, j, 6, 0) for j in range(5)] + [(1, j, 6, 0) for j in range(4)] + [(2, j, 2, 0) for j in range(5)]
    labels = build_labels(log_of(rows, n=3, m=6), {"g": range(5), "none": []})
    assert labels[0].positives == {0}
    assert labels[1].positives == frozenset()
    with pytest.raises(ValueError):
        build_labels(log_of(rows), {})


def test_limit_group_items_by_frequency():
    log = log_of([(0, 2, 1, 0), (1, 2, 1, 0), (0, 1, 1, 0), (0, 0, 1, 0)], m=4)
    assert limit_group_items({"g": {0, 1, 2, 3}}, log, 2) == {"g": frozenset({2, 0})}


def test_dataset_from_log_warns_on_empty_validation_labels():
    rows = [(i % 3, i % 4, 1, i) for i in range(30)]
    with pytest.warns(UserWarning, match="no positives"):
        ds = dataset_from_log(log_of(rows), {"g": [0, 1]}, value_threshold=100)
    assert ds.label_names == ["g"]


# ---- synthetic ------------------------------------------------------------


def test_synthetic_is_deterministic():
    a = generate_synthetic(60, 3, 0.8, 0.1, seed=4)
    b = generate_synthetic(60, 3, 0.8, 0.1, seed=4)
    assert all(x == y for x, y in zip(a.partitions, b.partitions))
    assert a.label_sets == b.label_sets
    c = generate_synthetic(60, 3, 0.8, 0.1, seed=5)
    assert any(x != y for x, y in zip(a.partitions, c.partitions))


def test_synthetic_pure_communities():
    ds = generate_synthetic(90, 3, 1.0, 0.0, seed=1)
    comm = ds.communities
    for part in ("validation", "training", "testing"):
        S = cosine_matrix(ds.partition(part))
        nonempty = ds.partition(part).nnz_per_row() > 0
        same = comm[:, None] == comm[None, :]
        both = nonempty[:, None] & nonempty[None, :]
        assert S[both & ~same].max() == 0
        assert S[both & same].min() > 0
        for g in range(3):
            assert ds.label(part, f"community_{g}").positives == set(np.flatnonzero(comm == g).tolist())


def test_synthetic_label_noise_rate():
    ds = generate_synthetic(2000, 4, 0.9, 0.2, seed=0)
    comm = ds.communities
    flips = [np.mean(ds.label("training", f"community_{g}").mask(2000) != (comm == g)) for g in range(4)]
    assert all(abs(f - 0.2) < 0.03 for f in flips)


def test_synthetic_rejects_bad_parameters():
    for args in ((10, 0, 0.5, 0.1), (10, 3, 0.0, 0.1), (10, 3, 0.5, 1.0), (3, 5, 0.5, 0.0)):
        with pytest.raises(ValueError):
            generate_synthetic(*args, seed=0)


def test_event_log_validation():
    with pytest.raises(ValueError):
        EventLog([0], [0], [1.0], [], 1, 1)
    with pytest.raises(ValueError):
        EventLog([3], [0], [1.0], [0], 1, 1)
    with pytest.raises(ValueError):
        EventLog([0], [0], [np.nan], [0], 1, 1)


def test_attribute_matrix_row():
    ds = generate_synthetic(20, 2, 0.9, 0.0, seed=2)
    A = ds.partition("training")
    idx, val = A.row(3)
    assert np.array_equal(sp.csr_matrix(A.csr[3]).indices, idx) and np.all(val > 0)
