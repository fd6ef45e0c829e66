# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the factored ellipsoid representation.

Same contracts as ``_numpy_impl``: the shape matrix is E = s*I - L diag(d) L.T
and nothing p-by-p is ever formed.  The batch kernel fuses the three row
products of the screening test into a single pass over the design matrix.
"""

import numpy as np

NAME = "compiled"


def matvec(double s, double[:, ::1] L, double[::1] d, double[::1] v):
    """Return ``E @ v`` through the factors."""
    cdef Py_ssize_t p = L.shape[0]
    cdef Py_ssize_t k = L.shape[1]
    out_arr = np.empty(p)
    u_arr = np.empty(k)
    cdef double[::1] out = out_arr
    cdef double[::1] u = u_arr
    cdef Py_ssize_t i, j
    cdef double acc
    for j in range(k):
        acc = 0.0
        for i in range(p):
            acc += L[i, j] * v[i]
        u[j] = acc * d[j]
    for i in range(p):
        acc = s * v[i]
        for j in range(k):
            acc -= L[i, j] * u[j]
        out[i] = acc
    return out_arr


def quad(double s, double[:, ::1] L, double[::1] d, double[::1] v):
    """Return ``v.T @ E @ v`` through the factors."""
    cdef Py_ssize_t p = L.shape[0]
    cdef Py_ssize_t k = L.shape[1]
    cdef double vv = 0.0
    cdef double tot, acc
    cdef Py_ssize_t i, j
    for i in range(p):
        vv += v[i] * v[i]
    tot = s * vv
    for j in range(k):
        acc = 0.0
        for i in range(p):
            acc += L[i, j] * v[i]
        tot -= d[j] * acc * acc
    return tot


def batch_terms(double[:, ::1] A, double[::1] z, double s,
                double[:, ::1] L, double[::1] d, eg):
    """Fused per-row products ``(A z, diag(A E A.T), A (E g))``."""
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t p = A.shape[1]
    cdef Py_ssize_t k = L.shape[1]
    az_arr = np.empty(n)
    qa_arr = np.empty(n)
    ga_arr = np.empty(n)
    cdef double[::1] az = az_arr
    cdef double[::1] qa = qa_arr
    cdef double[::1] ga = ga_arr
    cdef bint has_cut = eg is not None
    cdef double[::1] egv = az_arr if eg is None else eg
    cdef Py_ssize_t i, j, t
    cdef double dot_z, dot_sq, dot_g, acc, q
    for i in range(n):
        dot_z = 0.0
        dot_sq = 0.0
        dot_g = 0.0
        for t in range(p):
            dot_z += A[i, t] * z[t]
            dot_sq += A[i, t] * A[i, t]
        if has_cut:
            for t in range(p):
                dot_g += A[i, t] * egv[t]
        q = s * dot_sq
        for j in range(k):
            acc = 0.0
            for t in range(p):
                acc += A[i, t] * L[t, j]
            q -= d[j] * acc * acc
        az[i] = dot_z
        qa[i] = q
        if has_cut:
            ga[i] = dot_g
    return az_arr, qa_arr, (ga_arr if has_cut else None)
