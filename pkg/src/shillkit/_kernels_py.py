"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and update order. The SGD loops differ from the compiled
ones only in the summation order of the per-rating dot product, so results
agree to floating-point rounding; ``slope_one_accumulate`` is exact.
"""
import numpy as np
import scipy.sparse as sp


def svd_sgd_epoch(users, items, ratings, order, mu, bu, bi, P, Q, lr, reg):
    total = 0.0
    for idx in order:
        u = users[idx]
        i = items[idx]
        err = ratings[idx] - (mu + bu[u] + bi[i] + float(P[u] @ Q[i]))
        total += err * err
        bu[u] += lr * (err - reg * bu[u])
        bi[i] += lr * (err - reg * bi[i])
        pu = P[u].copy()
        qi = Q[i]
        P[u] = pu + lr * (err * qi - reg * pu)
        Q[i] = qi + lr * (err * pu - reg * qi)
    return total


def nmf_sgd_epoch(users, items, ratings, order, P, Q, lr, reg):
    total = 0.0
    for idx in order:
        u = users[idx]
        i = items[idx]
        err = ratings[idx] - float(P[u] @ Q[i])
        total += err * err
        pu = P[u] + lr * (err * Q[i] - reg * P[u])
        qi = Q[i] + lr * (err * P[u] - reg * Q[i])
        P[u] = np.maximum(pu, 0.0)
        Q[i] = np.maximum(qi, 0.0)
    return total


def slope_one_accumulate(indptr, indices, data, n_items):
    n_users = len(indptr) - 1
    ratings = sp.csr_matrix((np.asarray(data, dtype=np.float64), indices, indptr),
                            shape=(n_users, n_items))
    rated = ratings.copy()
    rated.data = np.ones_like(rated.data)
    freq = (rated.T @ rated).toarray()
    diff = (ratings.T @ rated).toarray() - (rated.T @ ratings).toarray()
    return freq, diff
