"""Numpy fallback for the low-rank ellipsoid kernels.

An ellipsoid shape matrix is kept in the factored form ``E = s*I - L*diag(d)*L.T``
where ``L`` is p-by-k.  Everything here works on that representation directly,
so no p-by-p matrix is ever formed.
"""

import numpy as np
import scipy.sparse as sp

NAME = "numpy"


def matvec(s, L, d, v):
    """Return ``E @ v`` through the factors."""
    if L.shape[1] == 0:
        return s * v
    return s * v - L @ (d * (L.T @ v))


def quad(s, L, d, v):
    """Return ``v.T @ E @ v`` through the factors."""
    out = s * float(v @ v)
    if L.shape[1]:
        u = L.T @ v
        out -= float(d @ (u * u))
    return out


def batch_terms(A, z, s, L, d, eg):
    """Per-row products needed by the screening tests.

    Returns ``(A @ z, diag(A E A.T), A @ eg)`` where the middle term is
    computed row-wise through the factors.  ``eg`` (the precomputed ``E @ g``
    of a half-space cut) may be None, in which case the last entry is None.
    """
    az = np.asarray(A @ z).ravel()
    if sp.issparse(A):
        row_sq = np.asarray(A.multiply(A).sum(axis=1)).ravel()
    else:
        row_sq = np.einsum("ij,ij->i", A, A)
    qa = s * row_sq
    if L.shape[1]:
        U = np.asarray(A @ L)
        qa = qa - (U * U) @ d
    ga = None if eg is None else np.asarray(A @ eg).ravel()
    return az, qa, ga
