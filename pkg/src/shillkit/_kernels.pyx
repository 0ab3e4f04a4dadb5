# cython: language_level=3
"""Compiled inner loops for the victim recommenders.

Every routine here has a line-for-line counterpart in ``_kernels_py``; the two
are selected between in ``shillkit.kernels``.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def svd_sgd_epoch(const long long[:] users, const long long[:] items,
                  const double[:] ratings, const long long[:] order,
                  double mu, double[:] bu, double[:] bi,
                  double[:, :] P, double[:, :] Q, double lr, double reg):
    """One SGD sweep of biased MF in the given rating order.

    Returns the sum of squared pre-update errors.
    """
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t d = P.shape[1]
    cdef Py_ssize_t k, f
    cdef long long idx, u, i
    cdef double err, dot, puf, qif, total = 0.0
    for k in range(n):
        idx = order[k]
        u = users[idx]
        i = items[idx]
        dot = 0.0
        for f in range(d):
            dot = dot + P[u, f] * Q[i, f]
        err = ratings[idx] - (mu + bu[u] + bi[i] + dot)
        total = total + err * err
        bu[u] = bu[u] + lr * (err - reg * bu[u])
        bi[i] = bi[i] + lr * (err - reg * bi[i])
        for f in range(d):
            puf = P[u, f]
            qif = Q[i, f]
            P[u, f] = puf + lr * (err * qif - reg * puf)
            Q[i, f] = qif + lr * (err * puf - reg * qif)
    return total


def nmf_sgd_epoch(const long long[:] users, const long long[:] items,
                  const double[:] ratings, const long long[:] order,
                  double[:, :] P, double[:, :] Q, double lr, double reg):
    """One projected-SGD sweep of nonnegative MF; factors clamped at zero."""
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t d = P.shape[1]
    cdef Py_ssize_t k, f
    cdef long long idx, u, i
    cdef double err, dot, puf, qif, total = 0.0
    for k in range(n):
        idx = order[k]
        u = users[idx]
        i = items[idx]
        dot = 0.0
        for f in range(d):
            dot = dot + P[u, f] * Q[i, f]
        err = ratings[idx] - dot
        total = total + err * err
        for f in range(d):
            puf = P[u, f]
            qif = Q[i, f]
            puf = puf + lr * (err * qif - reg * puf)
            qif = qif + lr * (err * P[u, f] - reg * qif)
            P[u, f] = puf if puf > 0.0 else 0.0
            Q[i, f] = qif if qif > 0.0 else 0.0
    return total


def slope_one_accumulate(const long long[:] indptr, const long long[:] indices,
                         const double[:] data, Py_ssize_t n_items):
    """Co-rating counts and summed deviations over all ordered item pairs.

    ``freq[a, b]`` counts users rating both a and b; ``diff[a, b]`` sums
    ``r_a - r_b`` over those users. Input is a CSR user-by-item matrix.
    """
    freq_arr = np.zeros((n_items, n_items), dtype=np.float64)
    diff_arr = np.zeros((n_items, n_items), dtype=np.float64)
    cdef double[:, :] freq = freq_arr
    cdef double[:, :] diff = diff_arr
    cdef Py_ssize_t n_users = indptr.shape[0] - 1
    cdef Py_ssize_t u, p, q
    cdef long long a, b
    cdef double ra
    for u in range(n_users):
        for p in range(indptr[u], indptr[u + 1]):
            a = indices[p]
            ra = data[p]
            for q in range(indptr[u], indptr[u + 1]):
                b = indices[q]
                freq[a, b] += 1.0
                diff[a, b] += ra - data[q]
    return freq_arr, diff_arr
