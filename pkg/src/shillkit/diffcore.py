"""Small double-precision differentiable core.

Layers cache what they need in ``forward`` and, in ``backward``, return the
gradient with respect to their input while *accumulating* (``+=``) parameter
gradients. Callers zero gradients between steps, which keeps alternating
minimax updates explicit.

Row-major batches throughout: an input of shape ``(n, in_features)`` maps to
``(n, out_features)``.
"""
from __future__ import annotations

import numpy as np

BCE_EPS = 1e-7


class NonFiniteError(FloatingPointError):
    """A NaN or Inf appeared where finite values are required."""


def check_finite(values, what="tensor"):
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"non-finite values in {what}")
    return values


class Tensor:
    """A parameter: values plus a same-shape gradient accumulator."""

    __slots__ = ("values", "grad", "name")

    def __init__(self, values, name="", requires_grad=True):
        self.values = check_finite(np.array(values, dtype=np.float64), name or "tensor")
        self.grad = np.zeros_like(self.values) if requires_grad else None
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor({self.name!r}, shape={self.shape})"


def _values(t):
    return t.values if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)


# -- dense -------------------------------------------------------------------

def dense_forward(x, weight, bias):
    """Affine map ``x @ W + b`` for ``x`` of shape (n, in) and ``W`` (in, out)."""
    x = _values(x)
    w = _values(weight)
    b = _values(bias)
    if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ValueError(f"shape mismatch: input {x.shape}, weight {w.shape}, bias {b.shape}")
    return x @ w + b


def dense_backward(grad_out, x, weight, bias):
    """Accumulate into ``weight.grad`` / ``bias.grad``; return d(loss)/dx."""
    x = _values(x)
    if weight.grad is not None:
        weight.grad += x.T @ grad_out
    if bias.grad is not None:
        bias.grad += grad_out.sum(axis=0)
    return grad_out @ weight.values.T


class Module:
    def parameters(self):
        return []

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, x):
        return self.forward(x)


class Dense(Module):
    def __init__(self, in_features, out_features, rng, name="dense", init_scale=None):
        # Glorot-uniform by default
        limit = init_scale if init_scale is not None else np.sqrt(6.0 / (in_features + out_features))
        self.weight = Tensor(rng.uniform(-limit, limit, size=(in_features, out_features)),
                             f"{name}.weight")
        self.bias = Tensor(np.zeros(out_features), f"{name}.bias")
        self._x = None

    def forward(self, x):
        self._x = x
        return dense_forward(x, self.weight, self.bias)

    def backward(self, grad_out):
        return dense_backward(grad_out, self._x, self.weight, self.bias)

    def parameters(self):
        return [self.weight, self.bias]


class Embedding(Module):
    def __init__(self, num, dim, rng, name="embedding", std=0.01):
        self.weight = Tensor(rng.normal(0.0, std, size=(num, dim)), f"{name}.weight")
        self._idx = None

    def forward(self, idx):
        self._idx = np.asarray(idx)
        return self.weight.values[self._idx]

    def backward(self, grad_out):
        np.add.at(self.weight.grad, self._idx, grad_out)

    def parameters(self):
        return [self.weight]


# -- activations -------------------------------------------------------------

def relu(x):
    return np.maximum(x, 0.0)


def tanh(x):
    return np.tanh(x)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x):
    """Row-wise softmax with the row max subtracted first."""
    x = np.asarray(x, dtype=np.float64)
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(x):
    x = np.asarray(x, dtype=np.float64)
    z = x - x.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class ReLU(Module):
    def forward(self, x):
        self._mask = x > 0  # subgradient 0 at the kink
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out):
        return grad_out * self._mask


class Tanh(Module):
    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, grad_out):
        return grad_out * (1.0 - self._y ** 2)


class Sigmoid(Module):
    def forward(self, x):
        self._y = sigmoid(x)
        return self._y

    def backward(self, grad_out):
        return grad_out * self._y * (1.0 - self._y)


class Sequential(Module):
    def __init__(self, *layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


# -- losses: each returns (value, d value / d first argument) ----------------

def mse(pred, target, mask=None, reduction="mean"):
    """Squared error, optionally restricted to ``mask`` (e.g. observed entries).

    ``reduction="sum"`` gives the plain sum; ``"mean"`` divides by the number
    of counted entries.
    """
    pred = np.asarray(pred, dtype=np.float64)
    diff = pred - target
    if mask is not None:
        diff = diff * mask
        count = float(np.count_nonzero(mask))
    else:
        count = float(diff.size)
    value = float(np.sum(diff * diff))
    grad = 2.0 * diff
    if reduction == "mean":
        count = max(count, 1.0)
        value /= count
        grad /= count
    return check_finite(value, "mse"), grad


def rmse(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    diff = pred - target
    value = float(np.sqrt(np.mean(diff * diff)))
    if value == 0.0:
        return 0.0, np.zeros_like(diff)
    return check_finite(value, "rmse"), diff / (diff.size * value)


def bce(prob, label):
    """Mean binary cross-entropy; probabilities clamped to [eps, 1 - eps]."""
    p = np.clip(np.asarray(prob, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(label, dtype=np.float64)
    y = np.broadcast_to(y, p.shape)
    value = float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    grad = (-y / p + (1.0 - y) / (1.0 - p)) / p.size
    return check_finite(value, "bce"), grad


def softmax_nll(scores, target_index):
    """Summed negative log-softmax of ``target_index`` over rows of ``scores``."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    rows = np.arange(scores.shape[0])
    logp = log_softmax(scores)
    value = float(-np.sum(logp[rows, target_index]))
    grad = np.exp(logp)
    grad[rows, target_index] -= 1.0
    return check_finite(value, "softmax_nll"), grad


# -- optimizers --------------------------------------------------------------

class Optimizer:
    def __init__(self, params, lr):
        if not lr > 0:
            raise ValueError("learning rate must be positive")
        self.params = list(params)
        self.lr = lr

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        for p in self.params:
            check_finite(p.grad, f"gradient of {p.name or 'parameter'}")
        self._update()
        for p in self.params:
            check_finite(p.values, p.name or "parameter")


class SGD(Optimizer):
    def _update(self):
        for p in self.params:
            p.values -= self.lr * p.grad


class Adam(Optimizer):
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(params, lr)
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def _update(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad ** 2
            p.values -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(kind, params, lr, **kw):
    kind = kind.lower()
    if kind == "adam":
        return Adam(params, lr, **kw)
    if kind == "sgd":
        return SGD(params, lr)
    raise ValueError(f"unknown optimizer {kind!r}")


# -- gradient checking -------------------------------------------------------

def grad_check(fn, point, step=1e-5):
    """Max relative error between ``fn``'s analytic gradient and central differences.

    ``fn(x)`` returns ``(value, grad)``. Error per coordinate is
    ``|a - n| / max(1, |a|, |n|)``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.array(point, dtype=np.float64)
    value, analytic = fn(x.copy())
    if not np.isfinite(value):
        raise NonFiniteError("function value is not finite at the check point")
    analytic = np.broadcast_to(np.asarray(analytic, dtype=np.float64), x.shape)
    numeric = np.zeros_like(x)
    flat = x.reshape(-1)
    num_flat = numeric.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        fp = fn(x.copy())[0]
        flat[k] = orig - step
        fm = fn(x.copy())[0]
        flat[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError(f"function value not finite near coordinate {k}")
        num_flat[k] = (fp - fm) / (2.0 * step)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))
