"""Screening tests over a region: which samples provably do not matter.

A sample can be dropped when its margin stays strictly inside the loss's
flat interval for every x in a region containing the optimum.  Scores are
signed distances to that certificate, so positive means screenable for both
tasks:

  regression:      score_i = mu - max over region of |a_i.x - b_i|
  classification:  score_i = (min over region of b_i a_i.x) - threshold

The batch loop reuses one shared factor product per pass, costing O(npk)
multiply-adds overall; the per-sample cut branch is resolved with the
projection identity w.E w = a.E a - (g.E a)^2 / g.E g, which avoids a second
pass over the factors.
"""

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._kernels import OpCounter, backend_name, batch_terms
from .region import BallRegion, EllipsoidDegenerateError, region_max_linear

__all__ = ["ScreeningReport", "screen", "screen_regression",
           "screen_classification", "screen_with_gap_ball", "SCORE_TOL"]

SCORE_TOL = 1e-9   # strict-interior slack: screened means score > SCORE_TOL


@dataclass
class ScreeningReport:
    """Per-sample scores and mask, plus metadata for reproducibility.

    ``threshold`` is the flat-interval endpoint the margins were tested
    against (upper endpoint for regression, lower for classification).
    """

    scores: np.ndarray
    screened: np.ndarray
    threshold: float
    task: str
    region_meta: dict = field(default_factory=dict)
    audit: object = None
    warning: str | None = None

    @property
    def n(self):
        return self.scores.shape[0]

    @property
    def n_screened(self):
        return int(self.screened.sum())

    @property
    def fraction_screened(self):
        return self.n_screened / self.n if self.n else 0.0

    def screened_indices(self):
        return np.flatnonzero(self.screened)

    def kept_indices(self):
        return np.flatnonzero(~self.screened)

    def to_csv(self, path_or_file):
        """Write (index, score, screened) rows with a header."""
        def _write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "score", "screened"])
            for i, (s, m) in enumerate(zip(self.scores, self.screened)):
                w.writerow([i, format(float(s), ".17g"), int(m)])
        if hasattr(path_or_file, "write"):
            _write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                _write(fh)

    def summary(self):
        """JSON-ready summary of counts, threshold, and audit verdicts."""
        doc = {
            "schema": 1,
            "n": self.n,
            "n_screened": self.n_screened,
            "fraction_screened": self.fraction_screened,
            "threshold": self.threshold,
            "task": self.task,
            "region": self.region_meta,
            "warning": self.warning,
        }
        if self.audit is not None:
            doc["audit"] = self.audit.to_dict()
        return doc

    def to_json(self, path_or_file=None):
        text = json.dumps(self.summary(), indent=2)
        if path_or_file is None:
            return text
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w") as fh:
                fh.write(text)
        return text


def _region_meta(region, backend, elapsed, cost):
    meta = {"backend": backend, "seconds": elapsed, "madds": cost}
    if isinstance(region, BallRegion):
        meta.update(kind="ball", radius=region.radius, steps=0, cut=False)
    else:
        meta.update(kind="ellipsoid", steps=region.steps,
                    init_radius=region.init_radius,
                    cut=region.cut is not None)
    return meta


def _batch_maxima(region, A, ops):
    """(A z, sqrt-term without cut, g.E a, g.E g) for all rows at once."""
    if isinstance(region, BallRegion):
        if hasattr(A, "multiply"):
            row_sq = np.asarray(A.multiply(A).sum(axis=1)).ravel()
            unit = A.nnz
        else:
            row_sq = np.einsum("ij,ij->i", A, A)
            unit = A.shape[0] * A.shape[1]
        if ops is not None:
            ops.add(2 * unit)
        az = np.asarray(A @ region.center).ravel()
        return az, region.radius * np.sqrt(row_sq), None, None
    eg = None
    geg = None
    if region.cut is not None:
        eg = region.matvec(region.cut, ops=ops)
        geg = float(region.cut @ eg)
        if ops is not None:
            ops.add(region.p)
        if geg <= 0:
            raise EllipsoidDegenerateError("g.E g <= 0 in the screening test")
    az, qa, ga = batch_terms(A, region.center, region.scale, region.factors,
                             region.weights, eg, ops=ops)
    return az, np.sqrt(np.maximum(qa, 0.0)), ga, geg


def screen(prob, region, tol=SCORE_TOL, ops=None, audit=False,
           x_full=None, **audit_kw):
    """Dispatch to the task-appropriate screening test.

    With ``audit=True`` the a-posteriori safety audit runs afterwards and is
    attached to the report (``x_full`` may supply a precomputed reference
    solution; otherwise one is solved to high accuracy).
    """
    if prob.dataset.task == "regression":
        report = screen_regression(prob, region, tol=tol, ops=ops)
    else:
        report = screen_classification(prob, region, tol=tol, ops=ops)
    if audit:
        from .erm import audit_safety
        from .solver import solve
        if x_full is None:
            x_full = solve(prob, tol=1e-10, max_epochs=200000).x
        report.audit = audit_safety(prob, report.screened, x_full, region,
                                    **audit_kw)
    return report


def screen_regression(prob, region, tol=SCORE_TOL, ops=None):
    """Two-sided test: screened when max |a_i.x - b_i| over the region < mu."""
    if prob.dataset.task != "regression":
        raise ValueError("screen_regression needs a regression problem")
    own = OpCounter() if ops is None else ops
    thr = prob.loss.screening_threshold()
    A, b = prob.dataset.A, prob.dataset.b
    t0 = time.perf_counter()
    if thr is None or thr <= 0:
        scores = np.full(prob.n, -math.inf)
        warning = ("loss has no flat interval; nothing can be screened"
                   if thr is None else
                   "mu = 0 leaves a degenerate flat interval; nothing screened")
        mask = np.zeros(prob.n, dtype=bool)
        meta = _region_meta(region, backend_name(),
                            time.perf_counter() - t0, own.madds)
        return ScreeningReport(scores, mask, 0.0, "regression", meta,
                               warning=warning)
    az, root, ga, geg = _batch_maxima(region, A, own)
    if ga is None:
        # max(M+, M-) = |a.z - b| + sqrt(a.E a): same sqrt term on both sides
        worst = np.abs(az - b) + root
    else:
        # the cut is active for exactly one of the +/- directions
        proj = np.sqrt(np.maximum(root * root - ga * ga / geg, 0.0))
        plus = (az - b) + np.where(ga >= 0, proj, root)
        minus = (b - az) + np.where(-ga >= 0, proj, root)
        worst = np.maximum(plus, minus)
    scores = thr - worst
    mask = scores > tol
    meta = _region_meta(region, backend_name(), time.perf_counter() - t0,
                        own.madds)
    return ScreeningReport(scores, mask, float(thr), "regression", meta)


def screen_classification(prob, region, tol=SCORE_TOL, ops=None):
    """One-sided test: screened when min b_i a_i.x over the region > threshold."""
    if prob.dataset.task != "classification":
        raise ValueError("screen_classification needs a classification problem")
    own = OpCounter() if ops is None else ops
    A, b = prob.dataset.A, prob.dataset.b
    t0 = time.perf_counter()
    if prob.loss.mu <= 0 or not prob.loss.is_safe:
        scores = np.full(prob.n, -math.inf)
        warning = ("loss has no flat interval; nothing can be screened"
                   if not prob.loss.is_safe else
                   "mu = 0: screening disabled by contract")
        meta = _region_meta(region, backend_name(),
                            time.perf_counter() - t0, own.madds)
        return ScreeningReport(scores, np.zeros(prob.n, dtype=bool), 0.0,
                               "classification", meta, warning=warning)
    thr = prob.loss.screening_threshold()
    az, root, ga, geg = _batch_maxima(region, A, own)
    # min over region of b a.x = -(max of (-b a).x); the cut is active for
    # the direction -b a when g.E(-b a) = -b (g.E a) >= 0
    if ga is None:
        lowest = b * az - root
    else:
        gea_dir = -b * ga
        proj = np.sqrt(np.maximum(root * root - ga * ga / geg, 0.0))
        lowest = b * az - np.where(gea_dir >= 0, proj, root)
    scores = lowest - thr
    mask = scores > tol
    meta = _region_meta(region, backend_name(), time.perf_counter() - t0,
                        own.madds)
    return ScreeningReport(scores, mask, float(thr), "classification", meta)


def screen_with_gap_ball(prob, x, rule="sqrt", tol=SCORE_TOL, ops=None):
    """Baseline: screen over a duality-gap ball centered at the iterate x.

    ``rule`` picks the radius: "sqrt" for sqrt(2 gap / kappa) (needs strong
    convexity), "gap_over_lambda" for 2 gap / lambda.  Raises ValueError when
    the dual candidate at x is infeasible (infinite gap).
    """
    from .region import gap_ball_radius
    x = np.asarray(x, dtype=float).ravel()
    gap = prob.duality_gap(x)
    if not math.isfinite(gap):
        raise ValueError("duality gap at x is not finite; cannot size the ball")
    r = gap_ball_radius(rule, gap=gap, lam=prob.lam, kappa=prob.kappa)
    region = BallRegion(x, r)
    report = screen(prob, region, tol=tol, ops=ops)
    report.region_meta.update(rule=rule, gap=gap)
    return report
