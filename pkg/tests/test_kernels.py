import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from shillkit import _kernels_py as pure
from shillkit import kernels

compiled = pytest.importorskip("shillkit._kernels")


def triples(seed, n=15, m=12, density=0.4):
    rng = np.random.default_rng(seed)
    mask = rng.random((n, m)) < density
    mask[np.arange(n), rng.integers(0, m, n)] = True
    u, i = np.nonzero(mask)
    r = rng.integers(1, 6, size=u.size).astype(np.float64)
    return rng, u.astype(np.int64), i.astype(np.int64), r, n, m


class TestBackendSelection:
    def test_backend_name(self):
        assert kernels.BACKEND in ("compiled", "python")

    def test_pure_python_env(self, monkeypatch):
        import importlib
        monkeypatch.setenv("SHILLKIT_PURE_PYTHON", "1")
        try:
            mod = importlib.reload(kernels)
            assert mod.BACKEND == "python"
            assert mod.svd_sgd_epoch is pure.svd_sgd_epoch
        finally:
            monkeypatch.delenv("SHILLKIT_PURE_PYTHON")
            importlib.reload(kernels)


class TestEquivalence:
    @pytest.mark.parametrize("seed", range(5))
    def test_svd_epoch(self, seed):
        rng, u, i, r, n, m = triples(seed)
        order = rng.permutation(len(r)).astype(np.int64)
        init = [np.zeros(n), np.zeros(m), rng.normal(0, 0.1, (n, 4)), rng.normal(0, 0.1, (m, 4))]
        a = [x.copy() for x in init]
        b = [x.copy() for x in init]
        mu = float(r.mean())
        sa = pure.svd_sgd_epoch(u, i, r, order, mu, *a, 0.01, 0.02)
        sb = compiled.svd_sgd_epoch(u, i, r, order, mu, *b, 0.01, 0.02)
        assert sa == pytest.approx(sb, rel=1e-12)
        for x, y in zip(a, b):
            assert_allclose(x, y, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_nmf_epoch(self, seed):
        rng, u, i, r, n, m = triples(seed)
        order = rng.permutation(len(r)).astype(np.int64)
        P0, Q0 = rng.uniform(0, 1, (n, 3)), rng.uniform(0, 1, (m, 3))
        Pa, Qa, Pb, Qb = P0.copy(), Q0.copy(), P0.copy(), Q0.copy()
        sa = pure.nmf_sgd_epoch(u, i, r, order, Pa, Qa, 0.01, 0.06)
        sb = compiled.nmf_sgd_epoch(u, i, r, order, Pb, Qb, 0.01, 0.06)
        assert sa == pytest.approx(sb, rel=1e-12)
        assert_allclose(Pa, Pb, rtol=0, atol=1e-12)
        assert_allclose(Qa, Qb, rtol=0, atol=1e-12)
        assert Pb.min() >= 0 and Qb.min() >= 0

    @pytest.mark.parametrize("seed", range(5))
    def test_slope_one_exact(self, seed):
        import scipy.sparse as sp
        _, u, i, r, n, m = triples(seed)
        csr = sp.csr_matrix((r, (u, i)), shape=(n, m))
        args = (csr.indptr.astype(np.int64), csr.indices.astype(np.int64),
                csr.data.astype(np.float64), m)
        fa, da = pure.slope_one_accumulate(*args)
        fb, db = compiled.slope_one_accumulate(*args)
        assert_array_equal(fa, fb)
        assert_array_equal(da, db)

    def test_slope_one_brute_force(self):
        import scipy.sparse as sp
        _, u, i, r, n, m = triples(7, n=6, m=5, density=0.6)
        dense = np.zeros((n, m))
        dense[u, i] = r
        freq = np.zeros((m, m))
        diff = np.zeros((m, m))
        for row in dense:
            for a in range(m):
                for b in range(m):
                    if row[a] and row[b]:
                        freq[a, b] += 1
                        diff[a, b] += row[a] - row[b]
        csr = sp.csr_matrix(dense)
        f, d = kernels.slope_one_accumulate(csr.indptr.astype(np.int64),
                                            csr.indices.astype(np.int64), csr.data, m)
        assert_array_equal(f, freq)
        assert_array_equal(d, diff)
