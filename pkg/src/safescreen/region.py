"""Test regions guaranteed to contain the optimum: balls and cut ellipsoids.

The ellipsoid method starts from a ball around a warm start, repeatedly
computes a subgradient g at the current center z, keeps the half-ellipsoid
{g.(x - z) <= 0} that must contain the minimizer, and replaces it by the
minimum-volume ellipsoid containing that half.  Each shape update is rank
one, so after k steps the shape matrix is stored as

    E_k = s_k * I - L_k diag(d_k) L_k.T,     L_k: p-by-k,

and every product with E costs O(pk) instead of O(p^2).  The final region
keeps the subgradient at its last center as a half-space cut, roughly
halving the region for free.

Maximizing a linear form a.x - c over the cut ellipsoid has the closed form
implemented in :func:`region_max_linear`: without an active cut it is
a.z + sqrt(a.E a) - c, and when the cut is active (g.E a >= 0) the direction
is first projected, w = a - (g.E a / g.E g) g, giving a.z + sqrt(w.E w) - c.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "BallRegion", "EllipsoidRegion", "EllipsoidDegenerateError",
    "init_ball", "gap_ball_radius", "ellipsoid_step", "build_region",
    "region_max_linear", "region_contains", "region_to_json",
    "region_from_json",
]


class EllipsoidDegenerateError(RuntimeError):
    """The shape matrix lost positive definiteness numerically."""


@dataclass(frozen=True)
class BallRegion:
    """Euclidean ball; radius 0 is the degenerate single-point region."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(
            self, "center", np.ascontiguousarray(self.center, dtype=float).ravel())
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    @property
    def p(self):
        return self.center.shape[0]


@dataclass(frozen=True)
class EllipsoidRegion:
    """Ellipsoid {x : (x-z).E^-1 (x-z) <= 1} with E = scale*I - L diag(d) L.T.

    ``cut`` is an optional half-space normal g anchored at the center,
    restricting the region to g.(x - z) <= 0.
    """

    center: np.ndarray
    scale: float
    factors: np.ndarray        # p-by-k
    weights: np.ndarray        # (k,)
    cut: np.ndarray | None = None
    init_radius: float | None = None
    steps: int = 0

    def __post_init__(self):
        z = np.ascontiguousarray(self.center, dtype=float).ravel()
        L = np.ascontiguousarray(self.factors, dtype=float)
        d = np.ascontiguousarray(self.weights, dtype=float).ravel()
        if L.ndim != 2 or L.shape[0] != z.shape[0]:
            raise ValueError("factors must be p-by-k")
        if d.shape[0] != L.shape[1]:
            raise ValueError("one weight per factor column is required")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "center", z)
        object.__setattr__(self, "factors", L)
        object.__setattr__(self, "weights", d)
        if self.cut is not None:
            g = np.ascontiguousarray(self.cut, dtype=float).ravel()
            if g.shape[0] != z.shape[0]:
                raise ValueError("cut normal dimension mismatch")
            object.__setattr__(self, "cut", g)

    @classmethod
    def from_ball(cls, ball):
        if ball.radius <= 0:
            raise ValueError("cannot start the ellipsoid method from a point")
        p = ball.p
        return cls(center=ball.center, scale=ball.radius ** 2,
                   factors=np.zeros((p, 0)), weights=np.zeros(0),
                   init_radius=ball.radius, steps=0)

    @property
    def p(self):
        return self.center.shape[0]

    @property
    def k(self):
        return self.factors.shape[1]

    def matvec(self, v, ops=None):
        """E @ v through the factors."""
        return _kernels.matvec(self.scale, self.factors, self.weights,
                               np.asarray(v, dtype=float).ravel(), ops=ops)

    def quad(self, v, ops=None):
        """v.T E v through the factors."""
        return _kernels.quad(self.scale, self.factors, self.weights,
                             np.asarray(v, dtype=float).ravel(), ops=ops)

    def to_dense(self):
        """Materialize E (tests and small problems only: O(p^2 k))."""
        E = self.scale * np.eye(self.p)
        if self.k:
            E -= (self.factors * self.weights) @ self.factors.T
        return E

    def min_eigenvalue(self):
        """Smallest eigenvalue of E via the k-by-k reduced problem."""
        if self.k == 0:
            return self.scale
        root = self.factors * np.sqrt(self.weights)
        lam_max = float(np.linalg.eigvalsh(root.T @ root).max())
        return self.scale - lam_max

    def logdet(self):
        """log det E via the determinant lemma on the k-by-k problem."""
        base = self.p * math.log(self.scale)
        if self.k == 0:
            return base
        small = np.eye(self.k) - (self.factors.T @ (self.factors * self.weights)) / self.scale
        sign, ld = np.linalg.slogdet(small)
        if sign <= 0:
            raise EllipsoidDegenerateError("shape matrix is not positive definite")
        return base + ld

    def solve(self, v):
        """E^{-1} v via the Woodbury identity (k-by-k solve)."""
        v = np.asarray(v, dtype=float).ravel()
        s = self.scale
        if self.k == 0:
            return v / s
        L, d = self.factors, self.weights
        inner = np.diag(1.0 / d) - (L.T @ L) / s
        y = np.linalg.solve(inner, L.T @ v / s)
        return v / s + (L @ y) / s


# ---------------------------------------------------------------------------
# initialization


def init_ball(x0, strategy="explicit", *, radius=None, bound=None, gap=None,
              kappa=None):
    """Build the initial ball around a warm start x0.

    strategies:
      - "explicit": radius given directly.
      - "strong_convexity": radius sqrt(2 * bound / kappa) from the upper
        bound `bound` on F(x0) - F* of a kappa-strongly-convex objective.
      - "gap": same inequality with a duality gap, radius sqrt(2 * gap / kappa).
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if strategy == "explicit":
        if radius is None or radius <= 0:
            raise ValueError("explicit strategy needs a positive radius")
        return BallRegion(x0, float(radius))
    if strategy == "strong_convexity":
        if not kappa or kappa <= 0:
            raise ValueError("strong_convexity strategy needs kappa > 0")
        if bound is None or bound < 0:
            raise ValueError("strong_convexity strategy needs bound >= 0")
        return BallRegion(x0, math.sqrt(2.0 * bound / kappa))
    if strategy == "gap":
        if not kappa or kappa <= 0:
            raise ValueError("gap strategy needs kappa > 0")
        if gap is None or gap < 0 or not math.isfinite(gap):
            raise ValueError("gap strategy needs a finite gap >= 0")
        return BallRegion(x0, math.sqrt(2.0 * gap / kappa))
    raise ValueError(f"unknown init strategy {strategy!r}")


def gap_ball_radius(rule, *, gap, lam=None, kappa=None):
    """Radius of the duality-gap ball baseline.

    ``rule="gap_over_lambda"`` uses 2*gap/lam; ``rule="sqrt"`` uses the
    strong-convexity radius sqrt(2*gap/kappa).  Both are exposed because the
    two appear interchangeably in the literature.
    """
    if not math.isfinite(gap) or gap < 0:
        raise ValueError("gap must be finite and nonnegative")
    if rule == "gap_over_lambda":
        if not lam or lam <= 0:
            raise ValueError("gap_over_lambda rule needs lam > 0")
        return 2.0 * gap / lam
    if rule == "sqrt":
        if not kappa or kappa <= 0:
            raise ValueError("sqrt rule needs kappa > 0")
        return math.sqrt(2.0 * gap / kappa)
    raise ValueError(f"unknown radius rule {rule!r}")


# ---------------------------------------------------------------------------
# the ellipsoid method


def ellipsoid_step(region, g, ops=None):
    """One minimum-volume update of the region for subgradient g at its center.

    Center moves to z - E gt / (p+1) with gt = g / sqrt(g.E g); the shape
    update appends one rank-one term to the factored form.  O(pk) per call.
    """
    if isinstance(region, BallRegion):
        region = EllipsoidRegion.from_ball(region)
    g = np.asarray(g, dtype=float).ravel()
    p = region.p
    if p < 2:
        raise ValueError("the ellipsoid update needs dimension p >= 2")
    if not np.any(g):
        raise ValueError("zero subgradient: the center is already optimal")
    eg = region.matvec(g, ops=ops)
    geg = float(g @ eg)
    if ops is not None:
        ops.add(p)
    if geg <= 0 or not math.isfinite(geg):
        raise EllipsoidDegenerateError(
            f"g.E g = {geg:.3e} is not positive; the shape matrix has "
            "degenerated (try fewer steps or a larger initial radius)")
    egt = eg / math.sqrt(geg)
    grow = p * p / (p * p - 1.0)
    new_center = region.center - egt / (p + 1.0)
    new_scale = grow * region.scale
    new_weights = np.append(grow * region.weights, grow * 2.0 / (p + 1.0))
    new_factors = np.concatenate([region.factors, egt[:, None]], axis=1)
    if ops is not None:
        ops.add(3 * p + region.k)
    return EllipsoidRegion(center=new_center, scale=new_scale,
                           factors=new_factors, weights=new_weights,
                           cut=None, init_radius=region.init_radius,
                           steps=region.steps + 1)


def build_region(prob, x0, r0, steps, ops=None, pd_guard=1e-12,
                 guard_every=16):
    """Run ``steps`` ellipsoid iterations on the problem from ball(x0, r0).

    Subgradients of the full objective drive the updates; the subgradient at
    the final center is kept as a half-space cut.  A zero subgradient at any
    center means that center is optimal: the region collapses to that point
    (returned as a zero-radius ball).  The update preserves positive
    definiteness in exact arithmetic, so numerical drift is only checked
    every ``guard_every`` steps; when the smallest eigenvalue falls below
    ``pd_guard * scale`` the last safe region is returned.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if r0 <= 0:
        raise ValueError("the initial radius must be positive")
    region = EllipsoidRegion.from_ball(BallRegion(x0, float(r0)))
    for it in range(steps):
        g = prob.subgradient(region.center)
        if ops is not None:
            ops.add(_subgradient_cost(prob))
        if not np.any(g):
            return BallRegion(region.center, 0.0)
        try:
            stepped = ellipsoid_step(region, g, ops=ops)
        except EllipsoidDegenerateError:
            break
        if (it % guard_every == guard_every - 1 or it == steps - 1) and \
                stepped.min_eigenvalue() < pd_guard * stepped.scale:
            break
        region = stepped
    g = prob.subgradient(region.center)
    if ops is not None:
        ops.add(_subgradient_cost(prob))
    if not np.any(g):
        return BallRegion(region.center, 0.0)
    return EllipsoidRegion(center=region.center, scale=region.scale,
                           factors=region.factors, weights=region.weights,
                           cut=g, init_radius=region.init_radius,
                           steps=region.steps)


def _subgradient_cost(prob):
    A = prob.dataset.A
    nnz = A.nnz if hasattr(A, "nnz") else A.shape[0] * A.shape[1]
    return 2 * nnz + prob.p


# ---------------------------------------------------------------------------
# closed-form maximization


def region_max_linear(region, a, offset=0.0, ops=None):
    """Maximum of a.x - offset over the region (cut included).

    Ellipsoid without an active cut: a.z + sqrt(a.E a) - offset.  With the
    cut active (g.E a >= 0), the direction is projected along g in the E
    metric first.  Ball of radius r: a.z + r ||a|| - offset.
    """
    a = np.asarray(a, dtype=float).ravel()
    if isinstance(region, BallRegion):
        if ops is not None:
            ops.add(2 * region.p)
        return float(a @ region.center
                     + region.radius * np.linalg.norm(a) - offset)
    base = float(a @ region.center)
    if ops is not None:
        ops.add(region.p)
    qa = region.quad(a, ops=ops)
    if region.cut is not None:
        g = region.cut
        eg = region.matvec(g, ops=ops)
        geg = float(g @ eg)
        gea = float(a @ eg)
        if ops is not None:
            ops.add(2 * region.p)
        if geg <= 0:
            raise EllipsoidDegenerateError("g.E g <= 0 in the screening test")
        if gea >= 0:
            qa = qa - gea * gea / geg
    return base + math.sqrt(max(qa, 0.0)) - float(offset)


def region_contains(region, x, tol=1e-9):
    """(inside, quadratic-form value, cut satisfied) for a candidate point."""
    x = np.asarray(x, dtype=float).ravel()
    dx = x - region.center
    if isinstance(region, BallRegion):
        nrm = float(np.linalg.norm(dx))
        if region.radius == 0:
            return nrm <= tol, nrm, True
        q = (nrm / region.radius) ** 2
        return q <= 1.0 + tol, q, True
    q = float(dx @ region.solve(dx))
    cut_ok = True
    if region.cut is not None:
        scale = float(np.linalg.norm(region.cut) * max(np.linalg.norm(dx), 1.0))
        cut_ok = float(region.cut @ dx) <= tol * max(scale, 1.0)
    return q <= 1.0 + tol, q, cut_ok


# ---------------------------------------------------------------------------
# serialization (audit reproducibility)


def region_to_json(region, path_or_file=None):
    """Serialize a region to a JSON document (string when no target given)."""
    if isinstance(region, BallRegion):
        doc = {"schema": 1, "kind": "ball",
               "center": region.center.tolist(), "radius": region.radius}
    else:
        doc = {
            "schema": 1,
            "kind": "ellipsoid",
            "center": region.center.tolist(),
            "scale": region.scale,
            "weights": region.weights.tolist(),
            "columns": [col.tolist() for col in region.factors.T],
            "cut": None if region.cut is None else region.cut.tolist(),
            "init_radius": region.init_radius,
            "steps": region.steps,
        }
    text = json.dumps(doc, indent=2)
    if path_or_file is None:
        return text
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "w") as fh:
            fh.write(text)
    else:
        path_or_file.write(text)
    return text


def region_from_json(source):
    """Inverse of :func:`region_to_json` (path, file object, or JSON string)."""
    if hasattr(source, "read"):
        doc = json.load(source)
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        doc = json.loads(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    if doc.get("kind") == "ball":
        return BallRegion(np.asarray(doc["center"]), float(doc["radius"]))
    center = np.asarray(doc["center"], dtype=float)
    cols = doc.get("columns", [])
    factors = (np.asarray(cols, dtype=float).T if cols
               else np.zeros((center.shape[0], 0)))
    cut = doc.get("cut")
    return EllipsoidRegion(
        center=center, scale=float(doc["scale"]), factors=factors,
        weights=np.asarray(doc.get("weights", []), dtype=float),
        cut=None if cut is None else np.asarray(cut, dtype=float),
        init_radius=doc.get("init_radius"), steps=int(doc.get("steps", 0)))
