"""Victim recommenders: SVD, NMF, Slope-One, U/I-AutoRec and explicit NeuMF.

Every victim has ``fit(train, seed)``, ``predict(user, item)``,
``predict_all()`` and ``top_k(user, k, exclude)``. Scores are not clipped:
only rankings are evaluated.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .dataset import RatingMatrix
from .diffcore import (Adam, Dense, Embedding, ReLU, Sequential, Sigmoid, mse, rmse)
from .surrogate import DivergenceError

VICTIM_KINDS = ("SVD", "NMF", "SlopeOne", "UAutoRec", "IAutoRec", "NeuMF")


class NotFittedError(RuntimeError):
    pass


def top_k_from_scores(scores, k, exclude=()):
    """Indices of the ``k`` best scores outside ``exclude``; ties to the lower index."""
    if k < 1:
        raise ValueError("K must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    candidates = np.setdiff1d(np.arange(len(scores)), np.asarray(list(exclude), dtype=np.int64))
    order = np.lexsort((candidates, -scores[candidates]))
    return [int(i) for i in candidates[order[:k]]]


def _converged(history, window=50, tol=1e-6):
    return len(history) > window and history[-window - 1] - history[-1] < tol


class Victim:
    kind = "base"

    def __init__(self):
        self.train = None

    def _require_fit(self):
        if self.train is None:
            raise NotFittedError(f"{self.kind} victim used before fit")

    def fit(self, train: RatingMatrix, seed: int = 0):
        if train.num_ratings == 0:
            raise ValueError("cannot fit a victim on an empty matrix")
        self.train = train
        self._fit(train, seed)
        return self

    def predict(self, user, item):
        self._require_fit()
        return float(self.predict_all_rows([user])[0, item])

    def predict_all(self):
        self._require_fit()
        return self.predict_all_rows(np.arange(self.train.num_users))

    def top_k(self, user, k, exclude=None):
        self._require_fit()
        if exclude is None:
            exclude = self.train.rated_items(user)
        return top_k_from_scores(self.predict_all_rows([user])[0], k, exclude)


class SVD(Victim):
    """Biased MF (global mean + user/item bias + dot product) trained by SGD."""

    kind = "SVD"

    def __init__(self, dim=64, lr=0.005, reg=0.02, epochs=20, init_std=0.1):
        super().__init__()
        self.dim, self.lr, self.reg, self.epochs, self.init_std = dim, lr, reg, epochs, init_std

    def _fit(self, train, seed):
        rng = np.random.default_rng(seed)
        r = train.ratings.astype(np.float64)
        self.mu = float(r.mean())
        self.bu = np.zeros(train.num_users)
        self.bi = np.zeros(train.num_items)
        self.P = rng.normal(0.0, self.init_std, size=(train.num_users, self.dim))
        self.Q = rng.normal(0.0, self.init_std, size=(train.num_items, self.dim))
        self.history = []
        for epoch in range(self.epochs):
            order = rng.permutation(len(r)).astype(np.int64)
            sse = kernels.svd_sgd_epoch(train.users, train.items, r, order, self.mu,
                                        self.bu, self.bi, self.P, self.Q, self.lr, self.reg)
            if not np.isfinite(sse):
                raise DivergenceError("SVD victim", epoch)
            self.history.append(sse / len(r))
            if _converged(self.history):
                break

    def predict_all_rows(self, users):
        users = np.asarray(users)
        return (self.mu + self.bu[users, None] + self.bi[None, :]
                + self.P[users] @ self.Q.T)


class NMF(Victim):
    """Nonnegative MF by projected SGD (factors clamped at zero after each update)."""

    kind = "NMF"

    def __init__(self, dim=16, lr=0.005, reg=0.06, epochs=50, init_low=0.0, init_high=1.0):
        super().__init__()
        self.dim, self.lr, self.reg, self.epochs = dim, lr, reg, epochs
        self.init_low, self.init_high = init_low, init_high

    def _fit(self, train, seed, callback=None):
        rng = np.random.default_rng(seed)
        r = train.ratings.astype(np.float64)
        self.P = rng.uniform(self.init_low, self.init_high, size=(train.num_users, self.dim))
        self.Q = rng.uniform(self.init_low, self.init_high, size=(train.num_items, self.dim))
        self.history = []
        for epoch in range(self.epochs):
            order = rng.permutation(len(r)).astype(np.int64)
            sse = kernels.nmf_sgd_epoch(train.users, train.items, r, order,
                                        self.P, self.Q, self.lr, self.reg)
            if not np.isfinite(sse):
                raise DivergenceError("NMF victim", epoch)
            self.history.append(sse / len(r))
            if callback is not None:
                callback(epoch, self)
            if _converged(self.history):
                break

    def fit(self, train, seed=0, callback=None):
        if train.num_ratings == 0:
            raise ValueError("cannot fit a victim on an empty matrix")
        self.train = train
        self._fit(train, seed, callback)
        return self

    def predict_all_rows(self, users):
        return self.P[np.asarray(users)] @ self.Q.T


class SlopeOne(Victim):
    """Weighted Slope-One over item-pair average deviations (deterministic)."""

    kind = "SlopeOne"

    def _fit(self, train, seed=None):
        csr = train.to_csr()
        self.freq, self.diff = kernels.slope_one_accumulate(
            csr.indptr.astype(np.int64), csr.indices.astype(np.int64),
            csr.data.astype(np.float64), train.num_items)
        stats_count = train.item_counts()
        sums = np.bincount(train.items, weights=train.ratings, minlength=train.num_items)
        global_mean = float(train.ratings.mean())
        with np.errstate(invalid="ignore", divide="ignore"):
            self.item_mean = np.where(stats_count > 0, sums / stats_count, global_mean)
        self._csr = csr

    @property
    def deviation(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.freq > 0, self.diff / self.freq, 0.0)

    def predict_all_rows(self, users):
        users = np.asarray(users)
        sub = self._csr[users]
        rated = sub.copy()
        rated.data = np.ones_like(rated.data)
        # sum_j (diff[i,j] + r_uj * freq[i,j]) and sum_j freq[i,j] over rated j
        num = np.asarray(rated @ self.diff.T) + np.asarray(sub @ self.freq.T)
        den = np.asarray(rated @ self.freq.T)
        # drop the j == i term for items the user has rated
        r, c = sub.nonzero()
        diag = np.diag(self.freq)
        num[r, c] -= np.asarray(sub[r, c]).ravel() * diag[c]
        den[r, c] -= diag[c]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(den > 0, num / den, self.item_mean[None, :])
        return out


class AutoRec(Victim):
    """One-hidden-layer AutoRec over user rows (``axis="user"``) or item columns."""

    def __init__(self, axis="item", hidden=128, lr=1e-3, reg=1e-3, steps=300, init_scale=None):
        super().__init__()
        if axis not in ("user", "item"):
            raise ValueError("axis must be 'user' or 'item'")
        self.axis = axis
        self.kind = "UAutoRec" if axis == "user" else "IAutoRec"
        self.hidden, self.lr, self.reg, self.steps = hidden, lr, reg, steps
        self.init_scale = init_scale

    def _inputs(self, train):
        dense = train.to_dense()
        return dense if self.axis == "user" else dense.T

    def build(self, in_dim, seed):
        rng = np.random.default_rng(seed)
        self.net = Sequential(Dense(in_dim, self.hidden, rng, "enc", self.init_scale), Sigmoid(),
                              Dense(self.hidden, in_dim, rng, "dec", self.init_scale))
        return self.net

    def objective(self, R):
        """Masked MSE + L2 on weights; accumulates parameter gradients."""
        out = self.net.forward(R)
        mask = R != 0
        value, grad = mse(out, R, mask=mask)
        self.net.backward(grad)
        for layer in (self.net.layers[0], self.net.layers[2]):
            value += 0.5 * self.reg * float(np.sum(layer.weight.values ** 2))
            layer.weight.grad += self.reg * layer.weight.values
        return value

    def _fit(self, train, seed):
        R = self._inputs(train)
        self.build(R.shape[1], seed)
        opt = Adam(self.net.parameters(), lr=self.lr)
        self.history = []
        for step in range(self.steps):
            opt.zero_grad()
            value = self.objective(R)
            if not np.isfinite(value):
                raise DivergenceError(f"{self.kind} victim", step)
            opt.step()
            self.history.append(value)
            if _converged(self.history):
                break
        self._recon = self.net.forward(R)

    def predict_all_rows(self, users):
        users = np.asarray(users)
        return self._recon[users] if self.axis == "user" else self._recon[:, users].T


class NeuMF(Victim):
    """GMF and MLP towers fused by a linear head, trained on explicit ratings with RMSE."""

    kind = "NeuMF"

    def __init__(self, emb_dim=8, mlp_layers=(16, 8), lr=1e-3, epochs=20, batch_size=256):
        super().__init__()
        self.emb_dim, self.mlp_layers = emb_dim, tuple(mlp_layers)
        self.lr, self.epochs, self.batch_size = lr, epochs, batch_size

    def build(self, num_users, num_items, seed, global_mean=0.0):
        rng = np.random.default_rng(seed)
        d = self.emb_dim
        self.gmf_u = Embedding(num_users, d, rng, "gmf_u")
        self.gmf_i = Embedding(num_items, d, rng, "gmf_i")
        self.mlp_u = Embedding(num_users, d, rng, "mlp_u")
        self.mlp_i = Embedding(num_items, d, rng, "mlp_i")
        layers, width = [], 2 * d
        for k, out in enumerate(self.mlp_layers):
            layers += [Dense(width, out, rng, f"mlp{k}"), ReLU()]
            width = out
        self.mlp = Sequential(*layers)
        self.head = Dense(d + width, 1, rng, "head")
        self.head.bias.values[:] = global_mean

    def parameters(self):
        return (self.gmf_u.parameters() + self.gmf_i.parameters() + self.mlp_u.parameters()
                + self.mlp_i.parameters() + self.mlp.parameters() + self.head.parameters())

    def forward(self, users, items):
        self._gu = self.gmf_u.forward(users)
        self._gi = self.gmf_i.forward(items)
        h = self.mlp.forward(np.hstack([self.mlp_u.forward(users), self.mlp_i.forward(items)]))
        return self.head.forward(np.hstack([self._gu * self._gi, h]))[:, 0]

    def objective(self, users, items, ratings):
        """RMSE on a batch; accumulates parameter gradients."""
        pred = self.forward(users, items)
        value, grad = rmse(pred, ratings)
        dz = self.head.backward(grad[:, None])
        d = self.emb_dim
        dg, dh = dz[:, :d], dz[:, d:]
        dh0 = self.mlp.backward(dh)
        self.mlp_u.backward(dh0[:, :d])
        self.mlp_i.backward(dh0[:, d:])
        self.gmf_u.backward(dg * self._gi)
        self.gmf_i.backward(dg * self._gu)
        return value

    def _fit(self, train, seed):
        rng = np.random.default_rng(seed)
        r = train.ratings.astype(np.float64)
        self.build(train.num_users, train.num_items, seed, float(r.mean()))
        opt = Adam(self.parameters(), lr=self.lr)
        self.history = []
        for epoch in range(self.epochs):
            order = rng.permutation(len(r))
            total = 0.0
            for start in range(0, len(r), self.batch_size):
                idx = order[start:start + self.batch_size]
                opt.zero_grad()
                value = self.objective(train.users[idx], train.items[idx], r[idx])
                if not np.isfinite(value):
                    raise DivergenceError("NeuMF victim", epoch)
                opt.step()
                total += value * value * len(idx)
            self.history.append(np.sqrt(total / len(r)))
            if _converged(self.history):
                break

    def predict_all_rows(self, users):
        users = np.asarray(users)
        m = self.gmf_i.weight.shape[0]
        items = np.arange(m)
        out = np.empty((len(users), m))
        for k, u in enumerate(users):
            out[k] = self.forward(np.full(m, u), items)
        return out


def make_victim(kind, **hyper):
    kinds = {"svd": SVD, "nmf": NMF, "slopeone": SlopeOne, "neumf": NeuMF}
    key = kind.lower().replace("-", "").replace("_", "")
    if key == "uautorec":
        return AutoRec(axis="user", **hyper)
    if key == "iautorec":
        return AutoRec(axis="item", **hyper)
    if key not in kinds:
        raise ValueError(f"unknown victim {kind!r}; expected one of {', '.join(VICTIM_KINDS)}")
    return kinds[key](**hyper)


def fit_victim(kind, train, seed=0, **hyper):
    return make_victim(kind, **hyper).fit(train, seed)
