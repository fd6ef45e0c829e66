"""Hot numerical kernels with a compiled core and a numpy fallback.

The compiled Cython extension is picked at import time when available;
setting the environment variable ``SAFESCREEN_PURE_PYTHON=1`` forces the
numpy fallback.  Sparse designs always go through the numpy/scipy path.

Every wrapper accepts an optional :class:`OpCounter` and charges it with the
number of scalar multiply-adds the call performs, which is how the documented
cost model (O(pk) per ellipsoid step, O(npk) per screening pass) is asserted
in the test suite.
"""

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _numpy_impl

if os.environ.get("SAFESCREEN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _numpy_impl
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _numpy_impl


def backend_name():
    """Name of the active backend: ``"compiled"`` or ``"numpy"``."""
    return getattr(_impl, "NAME", "numpy")


@dataclass
class OpCounter:
    """Mutable multiply-add counter threaded through the kernel wrappers."""

    madds: int = 0

    def add(self, count):
        self.madds += int(count)


def _as_c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def matvec(s, L, d, v, ops=None):
    """``E @ v`` for ``E = s*I - L*diag(d)*L.T``. Costs ~2pk + p + k madds."""
    p, k = L.shape
    if ops is not None:
        ops.add(2 * p * k + p + k)
    if _impl is _numpy_impl:
        return _numpy_impl.matvec(s, L, d, v)
    return _impl.matvec(float(s), _as_c(L), _as_c(d), _as_c(v))


def quad(s, L, d, v, ops=None):
    """``v.T @ E @ v``. Costs ~pk + p + k madds."""
    p, k = L.shape
    if ops is not None:
        ops.add(p * k + p + 2 * k)
    if _impl is _numpy_impl:
        return _numpy_impl.quad(s, L, d, v)
    return _impl.quad(float(s), _as_c(L), _as_c(d), _as_c(v))


def batch_terms(A, z, s, L, d, eg=None, ops=None):
    """Row-wise screening products ``(A z, diag(A E A.T), A (E g))``.

    The dominant cost is ``A @ L`` at n*p*k multiply-adds (nnz*k when A is
    sparse); the remaining terms are O(np + nk).
    """
    n = A.shape[0]
    k = L.shape[1]
    sparse = sp.issparse(A)
    unit = A.nnz if sparse else n * A.shape[1]
    if ops is not None:
        ops.add(unit * (k + 2) + 2 * n * k + (0 if eg is None else unit))
    if sparse or _impl is _numpy_impl:
        return _numpy_impl.batch_terms(A, z, s, L, d, eg)
    return _impl.batch_terms(
        _as_c(A), _as_c(z), float(s), _as_c(L), _as_c(d),
        None if eg is None else _as_c(eg))
