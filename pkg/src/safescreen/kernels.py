"""Kernelized screening: Gram-matrix problems over the coefficient vector.

With a kernel k and Gram matrix K, the model is a coefficient vector alpha,
predictions are K alpha, and the regularizer is the RKHS norm alpha.K alpha.
Margins K alpha - b are linear in alpha with the Gram rows playing the role
of the sample vectors, so the linear screening machinery applies unchanged
in alpha space (dimension n, which bounds the practical problem size).
"""

import hashlib
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.spatial.distance as ssd

from .erm import Dataset, ErmProblem
from .losses import QuadFormPenalty, ScalarLoss
from .screening import screen_regression

__all__ = ["GramProblem", "gram_matrix", "screen_kernel", "gram_cache_key",
           "cached_gram"]


def gram_matrix(dataset, kernel="linear", gamma=None, degree=3, coef=1.0):
    """Gram matrix of the dataset rows under the chosen kernel.

    kernels: "linear" a.a'; "rbf" exp(-gamma ||a - a'||^2) (gamma > 0);
    "polynomial" (a.a' + coef)^degree.
    """
    A = dataset.A.toarray() if sp.issparse(dataset.A) else dataset.A
    if kernel == "linear":
        return A @ A.T
    if kernel == "rbf":
        if gamma is None or gamma <= 0:
            raise ValueError("rbf kernel needs gamma > 0")
        sq = ssd.squareform(ssd.pdist(A, "sqeuclidean"), checks=False)
        return np.exp(-gamma * sq)
    if kernel == "polynomial":
        return (A @ A.T + coef) ** degree
    raise ValueError(f"unknown kernel {kernel!r}")


@dataclass(frozen=True)
class GramProblem:
    """Flat-loss fit of K alpha to b with the RKHS-norm regularizer.

    The objective (mean loss of K alpha - b, plus lam * alpha.K alpha) is
    convex only for positive semidefinite K; construction rejects matrices
    whose sampled Rayleigh quotients are meaningfully negative.
    """

    K: np.ndarray
    b: np.ndarray
    loss: ScalarLoss
    lam: float

    def __post_init__(self):
        K = np.ascontiguousarray(self.K, dtype=float)
        b = np.ascontiguousarray(self.b, dtype=float).ravel()
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("the Gram matrix must be square")
        if K.shape[0] != b.shape[0]:
            raise ValueError("label count must match the Gram size")
        if np.abs(K - K.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(K).max()):
            raise ValueError("the Gram matrix must be symmetric")
        if K.shape[0] and float(K.diagonal().min()) < -1e-12:
            raise ValueError("the Gram matrix has a negative diagonal entry")
        rng = np.random.default_rng(0)
        for _ in range(32):
            v = rng.standard_normal(K.shape[0])
            q = float(v @ (K @ v)) / float(v @ v)
            if q < -1e-8:
                raise ValueError(
                    f"Gram matrix is not positive semidefinite "
                    f"(Rayleigh quotient {q:.3e}); the problem would be "
                    "nonconvex")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.K.shape[0]

    def to_erm(self):
        """Equivalent linear problem over alpha: rows are Gram rows and the
        penalty is the quadratic form (gradient 2 lam K alpha)."""
        ds = Dataset(self.K, self.b, "regression")
        return ErmProblem(ds, self.loss, QuadFormPenalty(self.K), self.lam)


def screen_kernel(prob, region, tol=1e-9, ops=None):
    """Screening test in alpha space: the i-th linear form is the Gram row."""
    return screen_regression(prob.to_erm(), region, tol=tol, ops=ops)


# ---------------------------------------------------------------------------
# optional Gram caching


def gram_cache_key(dataset, kernel, **params):
    """Stable hash of (data bytes, kernel, parameters)."""
    h = hashlib.sha256()
    A = dataset.A
    if sp.issparse(A):
        A = A.tocsr()
        for part in (A.data, A.indices, A.indptr):
            h.update(np.ascontiguousarray(part).tobytes())
    else:
        h.update(np.ascontiguousarray(A).tobytes())
    h.update(np.ascontiguousarray(dataset.b).tobytes())
    h.update(kernel.encode())
    for key in sorted(params):
        h.update(f"{key}={params[key]!r}".encode())
    return h.hexdigest()[:32]


def cached_gram(dataset, kernel="linear", cache_dir=None, **params):
    """Compute the Gram matrix, reusing a binary cache file when present."""
    if cache_dir is None:
        return gram_matrix(dataset, kernel, **params)
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(
        cache_dir, f"gram_{gram_cache_key(dataset, kernel, **params)}.npz")
    if os.path.exists(path):
        with np.load(path) as payload:
            return payload["K"]
    K = gram_matrix(dataset, kernel, **params)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, K=K)
    os.replace(tmp, path)
    return K
