# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the numpy training kernels.

Fuses the elementwise passes (bias+activation, activation backward, row-wise
log-softmax / cross-entropy, Adam) into single C loops.  Matrix products stay
in BLAS on the Python side, so this core removes the per-call numpy dispatch
and temporary-array overhead that dominates small-batch training steps.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt, tanh

cnp.import_array()

ACT_NONE = 0
ACT_RELU = 1
ACT_TANH = 2

NAME = "fast"


def add_bias_act(cnp.ndarray[cnp.float64_t, ndim=2] z,
                 cnp.ndarray[cnp.float64_t, ndim=1] b,
                 int kind):
    cdef Py_ssize_t m = z.shape[0], n = z.shape[1]
    cdef Py_ssize_t i, j
    cdef double x
    if kind < 0 or kind > 2:
        raise ValueError(f"unknown activation kind {kind}")
    for i in range(m):
        for j in range(n):
            x = z[i, j] + b[j]
            if kind == 1:
                z[i, j] = x if x > 0.0 else 0.0
            elif kind == 2:
                z[i, j] = tanh(x)
            else:
                z[i, j] = x
    return z


def act_backward(cnp.ndarray[cnp.float64_t, ndim=2] da,
                 cnp.ndarray[cnp.float64_t, ndim=2] a,
                 int kind):
    cdef Py_ssize_t m = da.shape[0], n = da.shape[1]
    cdef Py_ssize_t i, j
    cdef double av
    if kind < 0 or kind > 2:
        raise ValueError(f"unknown activation kind {kind}")
    if kind == 1:
        for i in range(m):
            for j in range(n):
                if a[i, j] <= 0.0:
                    da[i, j] = 0.0
    elif kind == 2:
        for i in range(m):
            for j in range(n):
                av = a[i, j]
                da[i, j] = da[i, j] * (1.0 - av * av)
    return da


def colsum(cnp.ndarray[cnp.float64_t, ndim=2] m):
    cdef Py_ssize_t rows = m.shape[0], cols = m.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(cols, dtype=np.float64)
    cdef Py_ssize_t i, j
    for i in range(rows):
        for j in range(cols):
            out[j] += m[i, j]
    return out


def log_softmax(cnp.ndarray[cnp.float64_t, ndim=2] logits):
    cdef Py_ssize_t m = logits.shape[0], k = logits.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((m, k), dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double zmax, s, shifted, lse
    for i in range(m):
        zmax = logits[i, 0]
        for j in range(1, k):
            if logits[i, j] > zmax:
                zmax = logits[i, j]
        s = 0.0
        for j in range(k):
            shifted = logits[i, j] - zmax
            out[i, j] = shifted
            s += exp(shifted)
        lse = log(s)
        for j in range(k):
            out[i, j] -= lse
    return out


def nll_grad(cnp.ndarray[cnp.float64_t, ndim=2] log_probs,
             cnp.ndarray[cnp.int64_t, ndim=1] labels):
    cdef Py_ssize_t m = log_probs.shape[0], k = log_probs.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dlogits = np.empty((m, k), dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double loss = 0.0
    for i in range(m):
        loss -= log_probs[i, labels[i]]
        for j in range(k):
            dlogits[i, j] = exp(log_probs[i, j])
        dlogits[i, labels[i]] -= 1.0
    return loss, dlogits


def adam_step(cnp.ndarray[cnp.float64_t, ndim=1] p,
              cnp.ndarray[cnp.float64_t, ndim=1] g,
              cnp.ndarray[cnp.float64_t, ndim=1] m,
              cnp.ndarray[cnp.float64_t, ndim=1] v,
              int t,
              double lr,
              double beta1,
              double beta2,
              double eps):
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    cdef double c1 = 1.0 - beta1**t
    cdef double c2 = 1.0 - beta2**t
    cdef double gi, mhat, vhat
    for i in range(n):
        gi = g[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi
        v[i] = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
        mhat = m[i] / c1
        vhat = v[i] / c2
        p[i] = p[i] - lr * mhat / (sqrt(vhat) + eps)


def sgd_step(cnp.ndarray[cnp.float64_t, ndim=1] p,
             cnp.ndarray[cnp.float64_t, ndim=1] g,
             double lr):
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    for i in range(n):
        p[i] = p[i] - lr * g[i]
