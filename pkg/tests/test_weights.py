import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy import stats

from netsel import mdl, weights as wm
from netsel.dataset import AttributeMatrix, generate_synthetic
from netsel.louvain import louvain, modularity
from netsel.netinfer import EdgeSet, NetworkModelSpec, build_knn


def star(n):
    return EdgeSet.from_pairs(n, np.r_[np.zeros(n - 1, int), np.arange(1, n)],
                              np.r_[np.arange(1, n), np.zeros(n - 1, int)], directed=False)


def cliques(sizes):
    src, dst, off = [], [], 0
    for s in sizes:
        for a, b in itertools.permutations(range(off, off + s), 2):
            src.append(a)
            dst.append(b)
        off += s
    return EdgeSet.from_pairs(off, src, dst, directed=False)


def attrs(nnz):
    rows = [np.arange(k) for k in nnz]
    X = sp.csr_matrix((np.ones(sum(nnz)), np.concatenate(rows) if rows else [],
                       np.r_[0, np.cumsum(nnz)]), shape=(len(nnz), max(max(nnz), 1)))
    return AttributeMatrix(X)


# ---- construction -------------------------------------------------------


def test_activity_flat_counts_nonzeros():
    W = wm.make_activity_flat(attrs([3, 1, 0]))
    assert W.values.tolist() == [3, 1, 0]
    assert W.cost_class == "O(|V|)" and not W.is_adjacency


def test_activity_flat_all_zero_falls_back():
    with pytest.warns(UserWarning, match="uniform"):
        W = wm.make_activity_flat(AttributeMatrix(sp.csr_matrix((3, 2))))
    assert W.values.tolist() == [1, 1, 1]


def test_degree_flat_star_and_empty():
    assert wm.make_degree_flat(star(5)).values.tolist() == [8, 2, 2, 2, 2]  # in+out stored both ways
    with pytest.warns(UserWarning):
        assert wm.make_degree_flat(EdgeSet.empty(3)).values.tolist() == [1, 1, 1]


def test_degree_flat_matches_edge_recount():
    rng = np.random.default_rng(0)
    src, dst = rng.integers(20, size=60), rng.integers(20, size=60)
    E = EdgeSet.from_pairs(20, src, dst)
    count = np.zeros(20, int)
    for a, b in set(zip(src.tolist(), dst.tolist())):
        if a != b:
            count[a] += 1
            count[b] += 1
    assert wm.make_degree_flat(E).values.tolist() == count.tolist()


def test_cluster_two_cliques():
    W = wm.make_cluster(cliques([10, 10]), seed=3)
    assert W.values.tolist() == [0] * 10 + [1] * 10
    assert W.representation_class == "assignment_list"


def test_louvain_small_cases():
    assert louvain(EdgeSet.empty(4)).tolist() == [0, 1, 2, 3]
    assert louvain(EdgeSet.from_pairs(2, [0], [1])).tolist() == [0, 0]


def test_two_cliques_partition_beats_every_split_and_merge():
    E = cliques([5, 5])
    best = modularity(E, [0] * 5 + [1] * 5)
    assert best > modularity(E, [0] * 10)
    for cut in range(1, 5):
        assert best > modularity(E, [0] * cut + [2] * (5 - cut) + [1] * 5)
    assert modularity(E, louvain(E, seed=1)) == pytest.approx(best)


@given(st.integers(3, 30), st.integers(0, 80), st.integers(0, 2**16))
@settings(max_examples=40, deadline=None)
def test_louvain_is_a_partition_no_worse_than_singletons(n, m, seed):
    rng = np.random.default_rng(seed)
    E = EdgeSet.from_pairs(n, rng.integers(n, size=m), rng.integers(n, size=m))
    comm = louvain(E, seed=seed)
    assert comm.shape == (n,)
    assert sorted(set(comm.tolist())) == list(range(comm.max() + 1))
    assert modularity(E, comm) >= modularity(E, np.arange(n)) - 1e-12
    assert np.array_equal(louvain(E, seed=seed), comm)


def test_louvain_agrees_with_networkx_on_planted_blocks():
    import networkx as nx
    G = nx.planted_partition_graph(4, 15, 0.8, 0.02, seed=5)
    pairs = np.array(G.edges())
    E = EdgeSet.from_pairs(60, np.r_[pairs[:, 0], pairs[:, 1]], np.r_[pairs[:, 1], pairs[:, 0]], directed=False)
    ours = modularity(E, louvain(E, seed=0))
    ref = nx.community.modularity(G, nx.community.louvain_communities(G, seed=0))
    assert ours == pytest.approx(ref, abs=0.02)


def test_random_has_uniform_weights():
    W = wm.make_random(7)
    assert set(W.values.tolist()) == {1}
    assert W.representation() == list(range(7))


def test_exemplar_models():
    ds = generate_synthetic(100, 4, 0.9, 0.0, seed=1)
    A = ds.partition("training")
    W = wm.make_activity_net(A, fraction=0.1, budget=3)
    ex = set(W.exemplars.tolist())
    assert len(ex) == 10
    nnz = A.nnz_per_row()
    assert min(nnz[list(ex)]) >= max(np.delete(nnz, list(ex)))
    assert set(W.adjacency.indices.tolist()) <= ex
    assert all(d == 3 for d in W.adjacency.out_degree())
    one = wm.make_activity_net(A, fraction=0.01, budget=3)
    assert one.params["truncated_budget"] == 1
    (only,) = one.exemplars.tolist()
    assert all(one.adjacency.out_neighbors(i).tolist() == [only] for i in range(100) if i != only)

    E = build_knn(A, NetworkModelSpec("knn", rho=500))
    D = wm.make_degree_net(E, A, fraction=0.2, budget=4)
    deg = E.degree()
    order = sorted(range(100), key=lambda i: (-deg[i], i))[:20]
    assert D.exemplars.tolist() == sorted(order)
    full = wm.make_activity_net(A, fraction=1.0, budget=5)
    plain = build_knn(A, NetworkModelSpec("knn", rho=500))
    assert full.adjacency == plain


def test_top_fraction_bounds():
    with pytest.raises(ValueError):
        wm.top_fraction(np.ones(3), 0)
    assert wm.top_fraction(np.array([1, 5, 5, 2]), 0.5).tolist() == [1, 2]


# ---- sampling -------------------------------------------------------------


def test_bfs_star_from_centre():
    U = wm.sample_subset(wm.make_bfs(star(8)), 0, 3, seed=1)
    assert len(set(U.tolist())) == 3 and 0 not in U


def test_bfs_goes_level_by_level():
    path = EdgeSet.from_pairs(5, [0, 1, 2, 3, 0], [1, 2, 3, 4, 4])
    assert wm.sample_subset(wm.make_bfs(path), 0, 2, seed=0).tolist() in ([1, 4], [4, 1])
    assert sorted(wm.sample_subset(wm.make_bfs(path), 0, 10, seed=0).tolist()) == [1, 2, 3, 4]


def test_cluster_sampling_stays_in_community():
    W = wm.NodeWeightModel("cluster", 6, values=np.array([0, 0, 1, 1, 1, 2]))
    assert wm.sample_subset(W, 0, 10, seed=0).tolist() == [1]
    assert sorted(wm.sample_subset(W, 2, 10, seed=0).tolist()) == [3, 4]
    assert wm.sample_subset(W, 5, 10, seed=0).size == 0
    assert wm.sample_subset(W, 0, 0, seed=0).size == 0
    with pytest.raises(ValueError):
        wm.sample_subset(W, 0, -1, seed=0)


def test_random_sampling_is_uniform():
    W = wm.make_random(20)
    counts = np.bincount(np.concatenate([wm.sample_subset(W, 0, 1, s) for s in range(10_000)]), minlength=20)
    assert counts[0] == 0
    assert stats.chisquare(counts[1:]).pvalue > 0.01


def test_uniform_activity_matches_random_law():
    W = wm.make_activity_flat(attrs([2] * 12))
    counts = np.bincount(np.concatenate([wm.sample_subset(W, 3, 2, s) for s in range(5000)]), minlength=12)
    assert counts[3] == 0
    assert stats.chisquare(np.delete(counts, 3)).pvalue > 0.01


def test_weighted_sampling_follows_weights():
    W = wm.NodeWeightModel("degree_flat", 4, values=np.array([0, 1, 3, 0]))
    draws = np.concatenate([wm.sample_subset(W, 0, 1, s) for s in range(6000)])
    assert set(draws.tolist()) <= {1, 2}
    assert abs((draws == 2).mean() - 0.75) < 0.03
    single = wm.NodeWeightModel("activity_flat", 3, values=np.array([0, 5, 0]))
    assert all(wm.sample_subset(single, 0, 2, s).tolist() == [1] for s in range(20))


@st.composite
def models(draw):
    n = draw(st.integers(2, 30))
    kind = draw(st.sampled_from(wm.KINDS))
    rng = np.random.default_rng(draw(st.integers(0, 2**16)))
    if kind in ("bfs", "activity_net", "degree_net"):
        E = EdgeSet.from_pairs(n, rng.integers(n, size=3 * n), rng.integers(n, size=3 * n))
        return wm.NodeWeightModel(kind, n, adjacency=E)
    hi = 3 if kind == "cluster" else 4
    return wm.NodeWeightModel(kind, n, values=rng.integers(0, hi, size=n))


@given(models(), st.integers(0, 40), st.integers(0, 2**32), st.data())
@settings(max_examples=150, deadline=None)
def test_samples_are_distinct_exclude_i_and_are_deterministic(W, k, seed, data):
    i = data.draw(st.integers(0, W.node_count - 1))
    U = wm.sample_subset(W, i, k, seed)
    assert i not in U and len(set(U.tolist())) == U.size <= k
    assert np.array_equal(U, wm.sample_subset(W, i, k, seed))
    if W.kind in ("activity_flat", "degree_flat", "random"):
        zero = set(np.flatnonzero(W.full_values() == 0).tolist())
        assert not zero & set(U.tolist())
        assert U.size == min(k, sum(1 for j, v in enumerate(W.full_values()) if v > 0 and j != i))


# ---- reach and restriction -------------------------------------------------


def test_reach_examples():
    assert wm.reach_set([[2, 3]], [1]).tolist() == [1, 2, 3]
    assert wm.reach_set([]).size == 0


@given(st.lists(st.lists(st.integers(0, 50), max_size=8), max_size=10), st.lists(st.integers(0, 50), max_size=5))
def test_reach_equals_union(subsets, evals):
    assert wm.reach_set(subsets, evals).tolist() == sorted(set().union(*map(set, subsets), evals))


def test_restriction_identity_empty_and_induced():
    E = EdgeSet.from_pairs(4, [0, 1, 2, 3], [1, 2, 3, 0])
    W = wm.make_bfs(E)
    assert wm.restrict_representation(W, range(4)).adjacency == E
    assert wm.restrict_representation(W, []).representation() == []
    sub = wm.restrict_representation(W, [0, 1, 3])
    assert sub.adjacency.pairs().tolist() == [[0, 1], [3, 0]]
    L = wm.make_degree_flat(E)
    assert wm.restrict_representation(L, [1, 3]).values.tolist() == [2, 2]
    assert wm.restrict_representation(L, []).representation() == []


@given(models(), st.lists(st.integers(0, 29), max_size=30))
@settings(max_examples=80, deadline=None)
def test_restriction_is_idempotent_and_never_costs_more(W, R):
    R = [r for r in R if r < W.node_count]
    once = wm.restrict_representation(W, R)
    twice = wm.restrict_representation(once, R)
    assert mdl.canonical(once.representation()) == mdl.canonical(twice.representation())
    assert mdl.cost(once.representation()) <= mdl.cost(W.representation())


def test_list_model_cannot_swap_adjacency():
    with pytest.raises(ValueError):
        wm.make_random(3).with_adjacency(EdgeSet.empty(3))
    with pytest.raises(ValueError):
        wm.NodeWeightModel("bfs", 3)
    with pytest.raises(ValueError):
        wm.NodeWeightModel("nope", 3, values=np.ones(3))
