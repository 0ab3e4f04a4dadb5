"""Differentiable surrogate recommenders used inside the attack loops.

The attack gradient follows the last-step unrolling scheme: the surrogate
after ``T - 1`` training steps is taken as a constant, one plain SGD step on
the poisoned matrix ``X* = [X; X_fake]`` is written out symbolically, and the
promotion loss evaluated at the stepped parameters is differentiated with
respect to the fake rows.
"""
from __future__ import annotations

import copy

import numpy as np

from .dataset import RatingMatrix
from .diffcore import (Dense, NonFiniteError, SGD, Sigmoid, Tensor,
                       check_finite, log_softmax, make_optimizer)


class DivergenceError(NonFiniteError):
    def __init__(self, where, step):
        super().__init__(f"{where} diverged (non-finite loss) at step {step}")
        self.step = step


def as_dense(real):
    if isinstance(real, RatingMatrix):
        return real.to_dense()
    return np.asarray(real, dtype=np.float64)


def promotion_loss(scores, targets, users=None):
    """Summed negative log-softmax of each target over all items.

    Returns ``(value, d value / d scores)``; rows outside ``users`` get zero
    gradient.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    rows = np.arange(scores.shape[0]) if users is None else np.asarray(users, dtype=np.int64)
    logp = log_softmax(scores[rows])
    value = float(-logp[:, targets].sum())
    grad = np.zeros_like(scores)
    sub = len(targets) * np.exp(logp)
    sub[:, targets] -= 1.0
    grad[rows] = sub
    return value, grad


class WrmfModel:
    """Weighted regularized MF trained by gradient descent on a dense view.

    Loss: ``sum w_ui (X_ui - P_u.Q_i)^2 + reg (|P|^2 + |Q|^2)`` where
    ``w_ui = w_obs`` on nonzero (observed) entries and ``w_miss`` on zeros.
    """

    kind = "wrmf"

    def __init__(self, num_users, num_items, dim=64, reg=1e-5, w_obs=1.0, w_miss=0.05,
                 seed=0, init_std=0.01, neg_sample_rate=None):
        if dim < 1:
            raise ValueError("latent dimension must be >= 1")
        if reg < 0 or w_obs <= 0 or w_miss < 0:
            raise ValueError("need reg >= 0, w_obs > 0, w_miss >= 0")
        self.dim, self.reg, self.w_obs, self.w_miss = dim, reg, w_obs, w_miss
        self.neg_sample_rate = neg_sample_rate
        self.rng = np.random.default_rng(seed)
        self.P = Tensor(self.rng.normal(0.0, init_std, size=(num_users, dim)), "P")
        self.Q = Tensor(self.rng.normal(0.0, init_std, size=(num_items, dim)), "Q")
        self._opt = None
        self._opt_key = None

    @property
    def num_users(self):
        return self.P.shape[0]

    @property
    def num_items(self):
        return self.Q.shape[0]

    def parameters(self):
        return [self.P, self.Q]

    def copy(self):
        return copy.deepcopy(self)

    def weights(self, X, mask=None):
        observed = (X != 0) if mask is None else mask
        return np.where(observed, self.w_obs, self.w_miss)

    def _step_weights(self, X):
        W = self.weights(X)
        if self.neg_sample_rate:
            # sampled-negatives mode: keep a random share of missing entries, reweighted
            keep = self.rng.random(X.shape) < self.neg_sample_rate
            W = np.where(X != 0, self.w_obs, np.where(keep, self.w_miss / self.neg_sample_rate, 0.0))
        return W

    def loss(self, X, W=None):
        W = self.weights(X) if W is None else W
        R = self.P.values @ self.Q.values.T
        data = float(np.sum(W * (X - R) ** 2))
        return data + self.reg * float(np.sum(self.P.values ** 2) + np.sum(self.Q.values ** 2))

    def loss_and_grads(self, X, W=None):
        W = self.weights(X) if W is None else W
        P, Q = self.P.values, self.Q.values
        D = P @ Q.T
        D -= X
        E = np.multiply(W, D)
        value = float(np.vdot(E, D))
        value += self.reg * float(np.vdot(P, P) + np.vdot(Q, Q))
        gP = 2.0 * (E @ Q) + 2.0 * self.reg * P
        gQ = 2.0 * (P.T @ E).T + 2.0 * self.reg * Q
        return value, gP, gQ

    def fit(self, X, steps, optimizer="adam", lr=1e-2):
        """Run ``steps`` gradient steps on dense ``X`` (continuing from current factors)."""
        if steps < 1:
            raise ValueError("steps must be >= 1")
        X = np.asarray(X, dtype=np.float64)
        self._check_shape(X)
        if self._opt is None or self._opt_key != (optimizer, lr):
            self._opt = make_optimizer(optimizer, self.parameters(), lr)
            self._opt_key = (optimizer, lr)
        W = None if self.neg_sample_rate else self.weights(X)
        for step in range(steps):
            value, gP, gQ = self.loss_and_grads(X, self._step_weights(X) if W is None else W)
            if not np.isfinite(value):
                raise DivergenceError("WRMF fit", step)
            self.P.grad[...] = gP
            self.Q.grad[...] = gQ
            self._opt.step()
        return self

    def sgd_step(self, X, lr, mask=None):
        """One plain SGD step (the step that is unrolled for attack gradients)."""
        value, gP, gQ = self.loss_and_grads(X, self.weights(X, mask))
        if not np.isfinite(value):
            raise DivergenceError("WRMF SGD step", 0)
        self.P.values = self.P.values - lr * gP
        self.Q.values = self.Q.values - lr * gQ
        return value

    def predict_all(self):
        return self.P.values @ self.Q.values.T

    def resize_users(self, num_users):
        """Grow (seeded init) or shrink the user-factor matrix to ``num_users`` rows."""
        cur = self.num_users
        if num_users > cur:
            extra = self.rng.normal(0.0, 0.01, size=(num_users - cur, self.dim))
            self.P = Tensor(np.vstack([self.P.values, extra]), "P")
        elif num_users < cur:
            self.P = Tensor(self.P.values[:num_users].copy(), "P")
        self._opt = None
        return self

    def _check_shape(self, X):
        if X.shape != (self.num_users, self.num_items):
            raise ValueError(f"matrix shape {X.shape} does not match model "
                             f"({self.num_users}, {self.num_items})")

    def unrolled_attack_grad(self, fake_rows, real, targets, inner_lr, users=None,
                             mask=None):
        """Gradient of the promotion loss after one unrolled SGD step w.r.t. the fake rows.

        ``self`` holds the parameters after ``T - 1`` steps and is not modified.
        ``mask`` marks the fake entries treated as observed (default: nonzero);
        the returned gradient is zero outside it. Returns ``(grad, loss)``.
        """
        real = as_dense(real)
        fake = np.asarray(fake_rows, dtype=np.float64)
        n_real = real.shape[0]
        X = np.vstack([real, fake])
        self._check_shape(X)
        fmask = (fake != 0) if mask is None else np.asarray(mask, dtype=bool)
        W = np.vstack([self.weights(real), self.weights(fake, fmask)])
        users = np.arange(n_real) if users is None else np.asarray(users)

        P0, Q0 = self.P.values, self.Q.values
        E0 = W * (P0 @ Q0.T - X)
        P1 = P0 - inner_lr * (2.0 * (E0 @ Q0) + 2.0 * self.reg * P0)
        Q1 = Q0 - inner_lr * (2.0 * (E0.T @ P0) + 2.0 * self.reg * Q0)

        scores = P1[users] @ Q1.T
        targets = np.atleast_1d(targets)
        logp = log_softmax(scores)
        loss = float(-logp[:, targets].sum())
        dS = len(targets) * np.exp(logp)
        dS[:, targets] -= 1.0
        gP1 = np.zeros_like(P1)
        gP1[users] = dS @ Q1
        gQ1 = dS.T @ P1[users]

        # dP1[v]/dX[v,i] = 2 lr w_vi Q0_i and dQ1[i]/dX[v,i] = 2 lr w_vi P0_v
        Wf = W[n_real:]
        grad = 2.0 * inner_lr * Wf * (gP1[n_real:] @ Q0.T + P0[n_real:] @ gQ1.T)
        grad = np.where(fmask, grad, 0.0)
        check_finite(grad, "unrolled attack gradient")
        return grad, loss


class IAutoRecSurrogate:
    """Item-based AutoRec surrogate: each item column over users is reconstructed.

    Hidden layer sigmoid, identity output. Attack gradients use the same
    one-step unroll; the mixed second derivative is taken by a central
    difference of the input gradient along the outer gradient direction.
    """

    kind = "iautorec"

    def __init__(self, num_users, num_items, hidden=128, reg=1e-5, w_obs=1.0, w_miss=0.05,
                 seed=0):
        rng = np.random.default_rng(seed)
        self.rng = rng
        self._num_items = num_items
        self.reg, self.w_obs, self.w_miss = reg, w_obs, w_miss
        self.hidden = hidden
        self.enc = Dense(num_users, hidden, rng, "enc")
        self.act = Sigmoid()
        self.dec = Dense(hidden, num_users, rng, "dec")
        self._opt = None

    @property
    def num_users(self):
        return self.enc.weight.shape[0]

    @property
    def num_items(self):
        return self._num_items

    def parameters(self):
        return self.enc.parameters() + self.dec.parameters()

    def weights(self, X, mask=None):
        observed = (X != 0) if mask is None else mask
        return np.where(observed, self.w_obs, self.w_miss)

    def predict_all(self, X=None):
        X = self._last_X if X is None else X
        return self.dec(self.act(self.enc(X.T))).T

    def _penalty(self):
        return self.reg * float(np.sum(self.enc.weight.values ** 2)
                                + np.sum(self.dec.weight.values ** 2))

    def loss_and_backward(self, X, W, input_grad=False):
        """Loss value; parameter grads are overwritten; optionally returns dL/dX."""
        for p in self.parameters():
            p.zero_grad()
        S = self.dec(self.act(self.enc(X.T)))  # items x users
        diff = W.T * (S - X.T)
        value = float(np.sum(diff * (S - X.T))) + self._penalty()
        g = 2.0 * diff
        g_in = self.enc.backward(self.act.backward(self.dec.backward(g)))
        self.enc.weight.grad += 2.0 * self.reg * self.enc.weight.values
        self.dec.weight.grad += 2.0 * self.reg * self.dec.weight.values
        if input_grad:
            # X enters as network input and as regression target
            return value, (g_in - 2.0 * diff).T
        return value

    def loss(self, X, W=None):
        W = self.weights(X) if W is None else W
        S = self.predict_all(X)
        return float(np.sum(W * (X - S) ** 2)) + self._penalty()

    def fit(self, X, steps, optimizer="adam", lr=1e-3):
        if steps < 1:
            raise ValueError("steps must be >= 1")
        X = np.asarray(X, dtype=np.float64)
        self._last_X = X
        if self._opt is None:
            self._opt = make_optimizer(optimizer, self.parameters(), lr)
        W = self.weights(X)
        for step in range(steps):
            value = self.loss_and_backward(X, W)
            if not np.isfinite(value):
                raise DivergenceError("IAutoRec surrogate fit", step)
            self._opt.step()
        return self

    def sgd_step(self, X, lr, mask=None):
        self._last_X = X
        value = self.loss_and_backward(X, self.weights(X, mask))
        SGD(self.parameters(), lr).step()
        return value

    def _get(self):
        return [p.values.copy() for p in self.parameters()]

    def _set(self, values):
        for p, v in zip(self.parameters(), values):
            p.values = v.copy()

    def unrolled_attack_grad(self, fake_rows, real, targets, inner_lr, users=None,
                             mask=None, fd_scale=1e-2):
        real = as_dense(real)
        fake = np.asarray(fake_rows, dtype=np.float64)
        n_real = real.shape[0]
        X = np.vstack([real, fake])
        fmask = (fake != 0) if mask is None else np.asarray(mask, dtype=bool)
        W = np.vstack([self.weights(real), self.weights(fake, fmask)])
        users = np.arange(n_real) if users is None else np.asarray(users)
        theta0 = self._get()

        self.loss_and_backward(X, W)
        grads0 = [p.grad.copy() for p in self.parameters()]
        theta1 = [t - inner_lr * g for t, g in zip(theta0, grads0)]
        self._set(theta1)

        # outer gradient at the stepped parameters; X also feeds the forward pass
        for p in self.parameters():
            p.zero_grad()
        S = self.dec(self.act(self.enc(X.T))).T
        loss, dS = promotion_loss(S, targets, users)
        g_in_outer = self.enc.backward(self.act.backward(self.dec.backward(dS.T))).T
        outer = [p.grad.copy() for p in self.parameters()]

        # d/dX <outer, grad_theta L_RS(X, theta0)> by central differences along outer
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in outer))
        eps = fd_scale / max(norm, 1e-12)
        self._set([t + eps * g for t, g in zip(theta0, outer)])
        _, gx_plus = self.loss_and_backward(X, W, input_grad=True)
        self._set([t - eps * g for t, g in zip(theta0, outer)])
        _, gx_minus = self.loss_and_backward(X, W, input_grad=True)
        self._set(theta0)
        for p in self.parameters():
            p.zero_grad()

        mixed = (gx_plus - gx_minus) / (2.0 * eps)
        grad = -inner_lr * mixed[n_real:] + g_in_outer[n_real:]
        grad = np.where(fmask, grad, 0.0)
        check_finite(grad, "unrolled attack gradient")
        return grad, loss

    def resize_users(self, num_users):
        if num_users != self.num_users:
            raise ValueError("IAutoRec surrogate input width is fixed at construction")
        return self


PRETRAIN_LR = {"wrmf": 3e-2, "iautorec": 1e-3}


def make_surrogate(kind, num_users, num_items, seed=0, **kw):
    kind = kind.lower()
    if kind == "wrmf":
        return WrmfModel(num_users, num_items, seed=seed, **kw)
    if kind == "iautorec":
        return IAutoRecSurrogate(num_users, num_items, seed=seed, **kw)
    raise ValueError(f"unknown surrogate {kind!r} (expected 'wrmf' or 'iautorec')")
