"""Time each hot kernel in its numba and numpy flavours on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call (compilation, or a cache load) is excluded; outputs of
the two flavours are checked for equality before timing.
"""

import argparse
import time

import numpy as np

from netsel import kernels


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases(rng):
    S = np.round(rng.random((400, 2000)), 3)
    yield "topk_rows 400x2000 k=6", kernels.topk_rows_nb, kernels.topk_rows_np, (S, 6, np.arange(400))

    X = rng.poisson(0.4, size=(150, 300)).astype(float)
    y = (X[:, :10].sum(1) > 3).astype(np.int64)
    w = np.bincount(rng.integers(150, size=150), minlength=150)
    yield "grow_tree 150x300 depth 8", kernels.grow_tree_nb, kernels.grow_tree_np, (X, y, w, 8, 17, 11)

    n = 2000
    A = rng.random((n, n)) < 0.004
    A = np.triu(A, 1)
    A = A | A.T
    indptr = np.r_[0, np.cumsum(A.sum(1))].astype(np.int64)
    indices = np.concatenate([np.flatnonzero(r) for r in A]).astype(np.int64)
    args = (indptr, indices, np.ones(indices.size), A.sum(1).astype(float), np.arange(n, dtype=np.int64),
            rng.permutation(n).astype(np.int64), float(A.sum()), 1e-9)
    yield "louvain_local_move n=2000", kernels.louvain_local_move_nb, kernels.louvain_local_move_np, args

    a, b = rng.integers(0, 30, size=800), rng.integers(0, 30, size=800)
    yield "pair_counts n=800", kernels.pair_counts_nb, kernels.pair_counts_np, (a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':30s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, nb, np_, xs in cases(rng):
        assert same(nb(*xs), np_(*xs)), f"{name}: flavours disagree"
        t_nb = best_of(nb, xs, args.repeat)
        t_np = best_of(np_, xs, max(1, args.repeat // 2))
        print(f"{name:30s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
