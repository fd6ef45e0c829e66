"""Datasets, regularized empirical-risk problems, duality, and the safety audit.

The primal objective is the mean loss plus a penalty,

    P(x) = (1/n) * sum_i loss(margin_i(x)) + lam * R(x),

with margin_i = a_i.x - b_i for regression and b_i * a_i.x for classification.
Its Lagrange dual in the per-sample variables nu is

    D(nu) = (1/n) * sum_i -f_i*(nu_i) - lam * R*(-A.T nu / (lam n)),

where f_i composes the scalar loss with the label convention of the task.
Weak duality P(x) >= D(nu) holds for every x and dual-feasible nu, which is
how the sign conventions here are pinned down by the tests.

Problems are immutable; screening produces masked variants that keep the
original 1/n normalization so that dropping samples whose loss vanishes
around the optimum provably does not move it.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .losses import ScalarLoss, SquaredL2Penalty

__all__ = ["Dataset", "ErmProblem", "AuditReport", "audit_safety"]


@dataclass(frozen=True)
class Dataset:
    """Design matrix (dense or CSR), labels, and task kind."""

    A: object
    b: np.ndarray
    task: str  # "regression" | "classification"

    def __post_init__(self):
        A = self.A
        if sp.issparse(A):
            A = A.tocsr().astype(float)
        else:
            A = np.ascontiguousarray(A, dtype=float)
            if A.ndim != 2:
                raise ValueError("design matrix must be 2-d")
        b = np.ascontiguousarray(self.b, dtype=float).ravel()
        if b.shape[0] != A.shape[0]:
            raise ValueError(
                f"label count {b.shape[0]} does not match row count {A.shape[0]}")
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "classification" and not np.all(np.abs(b) == 1.0):
            raise ValueError("classification labels must be -1 or +1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.A.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.A)

    def subset(self, idx):
        """New dataset restricted to the given row indices."""
        idx = np.asarray(idx)
        return Dataset(self.A[idx], self.b[idx], self.task)


@dataclass(frozen=True)
class ErmProblem:
    """Loss + penalty + regularization strength over a dataset.

    ``active`` is an optional boolean keep-mask.  Masked problems keep the
    1/n normalization of the full problem, so a mask that only removes
    samples with identically-zero loss around the optimum leaves the
    minimizer unchanged.
    """

    dataset: Dataset
    loss: ScalarLoss
    penalty: object
    lam: float
    active: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.loss.task != self.dataset.task:
            raise ValueError(
                f"{self.loss.kind!r} is a {self.loss.task} loss but the "
                f"dataset task is {self.dataset.task!r}")
        if self.active is not None:
            mask = np.asarray(self.active, dtype=bool).ravel()
            if mask.shape[0] != self.dataset.n:
                raise ValueError("mask length does not match sample count")
            object.__setattr__(self, "active", mask)

    @property
    def n(self):
        return self.dataset.n

    @property
    def p(self):
        return self.dataset.p

    @property
    def n_active(self):
        return self.n if self.active is None else int(self.active.sum())

    @property
    def kappa(self):
        """Strong-convexity constant of the objective (0 when none)."""
        if isinstance(self.penalty, SquaredL2Penalty):
            return self.lam
        return 0.0

    def masked(self, keep):
        """Problem restricted to ``keep`` (bool mask or index array)."""
        keep = np.asarray(keep)
        if keep.dtype != bool:
            mask = np.zeros(self.n, dtype=bool)
            mask[keep] = True
        else:
            mask = keep.copy()
        if self.active is not None:
            mask &= self.active
        return replace(self, active=mask)

    def _rows(self):
        A, b = self.dataset.A, self.dataset.b
        if self.active is None:
            return A, b, None
        return A[self.active], b[self.active], self.active

    # -- objective pieces ---------------------------------------------------

    def margins(self, x):
        """Per-sample margins at x (active samples only)."""
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.p:
            raise ValueError(f"x has dimension {x.shape[0]}, expected {self.p}")
        A, b, _ = self._rows()
        ax = np.asarray(A @ x).ravel()
        if self.dataset.task == "regression":
            return ax - b
        return b * ax

    def primal(self, x):
        """P(x) = mean loss over active samples (1/n of the full count) + lam R."""
        m = self.margins(x)
        return float(self.loss.value(m).sum()) / self.n \
            + self.lam * self.penalty.value(np.asarray(x, dtype=float).ravel())

    def subgradient(self, x):
        """A subgradient of the primal at x."""
        x = np.asarray(x, dtype=float).ravel()
        m = self.margins(x)
        w = np.asarray(self.loss.derivative(m), dtype=float)
        A, b, _ = self._rows()
        if self.dataset.task == "classification":
            w = w * b
        g = np.asarray(A.T @ w).ravel() / self.n
        return g + self.lam * self.penalty.subgrad(x)

    def loss_gradient_from_margins(self, m):
        """Gradient of the smooth loss term given precomputed margins."""
        w = np.asarray(self.loss.derivative(m), dtype=float)
        A, b, _ = self._rows()
        if self.dataset.task == "classification":
            w = w * b
        return np.asarray(A.T @ w).ravel() / self.n

    # -- duality ------------------------------------------------------------

    def dual_candidate(self, x):
        """Dual vector nu with nu_i a subgradient of f_i at a_i.x (full length n)."""
        m = self.margins(x)
        w = np.asarray(self.loss.derivative(m), dtype=float)
        _, b, _ = self._rows()
        if self.dataset.task == "classification":
            w = w * b
        nu = np.zeros(self.n)
        if self.active is None:
            nu[:] = w
        else:
            nu[self.active] = w
        return nu

    def _conj_terms(self, nu):
        """sum_i f_i*(nu_i) over active samples; inf when infeasible."""
        if self.active is None:
            nu_act, b = nu, self.dataset.b
        else:
            nu_act, b = nu[self.active], self.dataset.b[self.active]
        if self.dataset.task == "regression":
            vals = self.loss.conjugate(nu_act) + b * nu_act
        else:
            vals = self.loss.conjugate(b * nu_act)
        total = float(np.sum(vals))
        return total if np.all(np.isfinite(vals)) else math.inf

    def dual_value(self, nu):
        """D(nu); -inf when nu is dual-infeasible."""
        nu = np.asarray(nu, dtype=float).ravel()
        if nu.shape[0] != self.n:
            raise ValueError("nu must have one entry per sample")
        conj = self._conj_terms(nu)
        if not math.isfinite(conj):
            return -math.inf
        if self.active is None:
            atnu = np.asarray(self.dataset.A.T @ nu).ravel()
        else:
            atnu = np.asarray(self.dataset.A.T @ (nu * self.active)).ravel()
        y = -atnu / (self.lam * self.n)
        try:
            rconj = self.penalty.conjugate(y)
        except NotImplementedError:
            return math.nan
        if not math.isfinite(rconj):
            return -math.inf
        return -conj / self.n - self.lam * rconj

    def duality_gap(self, x):
        """P(x) - D(nu(x)) with the candidate rescaled into dual feasibility.

        When the penalty conjugate has a bounded domain (l1), the raw
        candidate is shrunk toward zero by the largest factor that makes it
        feasible; any feasible point gives a valid lower bound.  Returns +inf
        when no feasible candidate exists and NaN when the penalty exposes no
        conjugate at all.
        """
        x = np.asarray(x, dtype=float).ravel()
        nu = self.dual_candidate(x)
        if self.active is None:
            atnu = np.asarray(self.dataset.A.T @ nu).ravel()
        else:
            atnu = np.asarray(self.dataset.A.T @ (nu * self.active)).ravel()
        try:
            scale = self.penalty.conj_feasible_scale(
                -atnu / (self.lam * self.n))
        except AttributeError:
            scale = 1.0
        except NotImplementedError:
            return math.nan
        d = self.dual_value(nu if scale == 1.0 else scale * nu)
        if math.isnan(d):
            return math.nan
        p = self.primal(x)
        gap = p - d
        if gap < 0 and gap > -1e-10 * max(1.0, abs(p)):
            gap = 0.0
        return gap


# ---------------------------------------------------------------------------
# a-posteriori safety audit


@dataclass(frozen=True)
class AuditReport:
    """Outcome of the three a-posteriori safety checks.

    ``membership`` is the ellipsoid quadratic form value at the reference
    solution (<= 1 means inside), ``margin_slack`` the smallest distance of a
    screened margin to the flat-interval boundary (> 0 means strictly
    inside), and ``refit_rel_diff`` the relative full-data primal difference
    of the refit.
    """

    region_contains: bool
    membership: float
    cut_ok: bool
    margins_inside: bool
    margin_slack: float
    refit_ok: bool
    refit_rel_diff: float
    refit_x_dist: float

    @property
    def passed(self):
        return (self.region_contains and self.cut_ok
                and self.margins_inside and self.refit_ok)

    def to_dict(self):
        return {
            "passed": self.passed,
            "region_contains": self.region_contains,
            "membership": self.membership,
            "cut_ok": self.cut_ok,
            "margins_inside": self.margins_inside,
            "margin_slack": self.margin_slack,
            "refit_ok": self.refit_ok,
            "refit_rel_diff": self.refit_rel_diff,
            "refit_x_dist": self.refit_x_dist,
        }


def audit_safety(prob, screened, x_full, region, *, refit_tol=1e-7,
                 solver_tol=1e-10, max_epochs=100000, refit_x=None):
    """Check a posteriori that a screening pass was safe.

    (a) the reference solution ``x_full`` lies in ``region`` (including its
    half-space cut), (b) every screened sample's margin at ``x_full`` is
    strictly inside the flat interval, and (c) refitting on the unscreened
    complement reproduces the full-data primal value within ``refit_tol``
    relative.  ``x_full`` should be a high-accuracy solution of ``prob``.
    Report-only: nothing is raised on failure.
    """
    from .region import region_contains  # deferred: region imports erm types

    screened = np.asarray(screened)
    if screened.dtype != bool:
        mask = np.zeros(prob.n, dtype=bool)
        mask[screened] = True
    else:
        mask = screened
    x_full = np.asarray(x_full, dtype=float).ravel()

    inside, membership, cut_ok = region_contains(region, x_full)

    itv = prob.loss.flat_interval()
    if mask.any():
        m = prob.margins(x_full) if prob.active is None else \
            ErmProblem(prob.dataset, prob.loss, prob.penalty, prob.lam).margins(x_full)
        lo, hi = itv if itv is not None else (0.0, 0.0)
        slack = np.minimum(m[mask] - lo, hi - m[mask])
        margin_slack = float(slack.min())
        margins_inside = bool(margin_slack > 0)
    else:
        margin_slack = math.inf
        margins_inside = True

    if mask.any():
        if refit_x is None:
            from .solver import solve
            refit_x = solve(prob.masked(~mask), x0=x_full, tol=solver_tol,
                            max_epochs=max_epochs).x
        full_prob = prob if prob.active is None else replace(prob, active=None)
        p_ref = full_prob.primal(x_full)
        p_new = full_prob.primal(refit_x)
        denom = max(abs(p_ref), 1e-30)
        refit_rel_diff = abs(p_new - p_ref) / denom
        refit_x_dist = float(np.linalg.norm(refit_x - x_full))
    else:
        refit_rel_diff = 0.0
        refit_x_dist = 0.0

    return AuditReport(
        region_contains=inside,
        membership=membership,
        cut_ok=cut_ok,
        margins_inside=margins_inside,
        margin_slack=margin_slack,
        refit_ok=bool(refit_rel_diff <= refit_tol),
        refit_rel_diff=refit_rel_diff,
        refit_x_dist=refit_x_dist,
    )
