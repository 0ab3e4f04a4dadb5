"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--data data/ml-100k/u.data] [--repeat 3]

Without ``--data`` (or if the file is missing) a synthetic 943 x 1682 matrix
with 100k ratings is used. Prints seconds per call and the max abs difference
between the two backends' outputs.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from shillkit import _kernels_py
from shillkit.dataset import RatingMatrix, load_movielens

try:
    from shillkit import _kernels
except ImportError:
    _kernels = None


def synthetic(seed=0, n=943, m=1682, nnz=100_000):
    rng = np.random.default_rng(seed)
    flat = rng.choice(n * m, size=nnz, replace=False)
    return RatingMatrix(flat // m, flat % m, rng.integers(1, 6, size=nnz))


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def sgd_case(mod, train, kind, seed=0, dim=64):
    rng = np.random.default_rng(seed)
    r = train.ratings.astype(np.float64)
    order = rng.permutation(len(r)).astype(np.int64)
    P = rng.normal(0, 0.1, (train.num_users, dim))
    Q = rng.normal(0, 0.1, (train.num_items, dim))
    if kind == "svd":
        bu, bi = np.zeros(train.num_users), np.zeros(train.num_items)
        sse = mod.svd_sgd_epoch(train.users, train.items, r, order, float(r.mean()),
                                bu, bi, P, Q, 0.005, 0.02)
    else:
        P, Q = np.abs(P), np.abs(Q)
        sse = mod.nmf_sgd_epoch(train.users, train.items, r, order, P, Q, 0.005, 0.06)
    return np.concatenate([[sse], P.ravel(), Q.ravel()])


def slope_case(mod, train):
    csr = train.to_csr()
    freq, diff = mod.slope_one_accumulate(csr.indptr.astype(np.int64),
                                          csr.indices.astype(np.int64),
                                          csr.data.astype(np.float64), train.num_items)
    return np.concatenate([np.asarray(freq).ravel(), np.asarray(diff).ravel()])


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--data", default="data/ml-100k/u.data")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    train = load_movielens(args.data) if Path(args.data).exists() else synthetic()
    print(f"matrix: {train.num_users} users x {train.num_items} items, {train.num_ratings} ratings")
    if _kernels is None:
        print("compiled extension not built; only the fallback is timed")

    cases = {
        "svd_sgd_epoch": lambda mod: sgd_case(mod, train, "svd"),
        "nmf_sgd_epoch": lambda mod: sgd_case(mod, train, "nmf"),
        "slope_one_accumulate": lambda mod: slope_case(mod, train),
    }
    print(f"{'kernel':<22}{'python s':>11}{'compiled s':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, case in cases.items():
        t_py, out_py = best_of(lambda: case(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:<22}{t_py:>11.4f}")
            continue
        t_c, out_c = best_of(lambda: case(_kernels), args.repeat)
        diff = float(np.max(np.abs(out_py - out_c)))
        print(f"{name:<22}{t_py:>11.4f}{t_c:>12.4f}{t_py / t_c:>9.1f}x{diff:>13.2e}")


if __name__ == "__main__":
    main()
