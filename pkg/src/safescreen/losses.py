"""Scalar losses with flat regions, penalties, and a numerical flattening oracle.

A loss is "safe" when it is exactly zero on a non-degenerate interval of the
margin.  At an optimum, samples whose margin lies strictly inside that flat
interval carry a zero dual variable, which is what makes sample screening
possible.  The safe kinds here are obtained by infimal convolution of a base
loss with the scaled conjugate of a sparsity-inducing penalty; each closed
form is validated against the generic grid oracle :func:`inf_conv_oracle`.

All losses are scalar and vectorized elementwise; problems aggregate them.
Objects are immutable and safe to share across threads.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "ScalarLoss", "SquareDistance", "SafeLogistic", "Hinge", "SquaredHinge",
    "Huber", "PlainSquare", "PlainLogistic",
    "L1Penalty", "SquaredL2Penalty", "QuadFormPenalty",
    "make_loss", "make_penalty", "inf_conv_oracle", "smoothing_pair",
    "GridBoundaryError", "LOSS_IDS", "PENALTY_IDS",
]

_DOM_TOL = 1e-12


class GridBoundaryError(RuntimeError):
    """The grid optimum landed on the boundary; widen the grid."""


@dataclass(frozen=True)
class ScalarLoss:
    """Base scalar loss.  Subclasses define value/derivative/conjugate.

    Attributes
    ----------
    mu : float
        Flattening parameter.  For two-sided regression kinds the flat
        interval is (-mu, mu); for one-sided classification kinds it is
        [1 - mu, +inf).  Plain kinds have mu fixed at 0.
    """

    mu: float = 0.0

    kind = "abstract"
    task = "regression"
    smooth = True
    conjugate_exact = True

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")

    def value(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def conjugate(self, s):
        raise NotImplementedError

    def flat_interval(self):
        """(lo, hi) on which the loss vanishes identically, or None."""
        return None

    @property
    def is_safe(self):
        itv = self.flat_interval()
        return itv is not None and itv[1] - itv[0] > 0

    def screening_threshold(self):
        """Scalar threshold the screening test compares margins against.

        Regression kinds: margins must satisfy |t| < threshold (the upper
        endpoint of the flat interval).  Classification kinds: margins must
        satisfy t > threshold (the lower endpoint).
        """
        itv = self.flat_interval()
        if itv is None:
            return None
        return itv[1] if self.task == "regression" else itv[0]


class PlainSquare(ScalarLoss):
    """Quadratic loss t^2 / 2 (self-conjugate)."""

    kind = "square"
    task = "regression"

    def __post_init__(self):
        super().__post_init__()
        if self.mu != 0:
            raise ValueError("the plain square loss takes no threshold")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * t * t

    def derivative(self, t):
        return np.asarray(t, dtype=float) + 0.0

    def conjugate(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * s * s


class SquareDistance(ScalarLoss):
    """Squared distance to the interval [-mu, mu]: value max(|t|-mu, 0)^2 / 2.

    This is the quadratic loss flattened by the l-infinity ball of radius mu
    (equivalently, interval regression with equal-width intervals).  With
    mu = 0 it coincides with :class:`PlainSquare`.
    """

    kind = "sqdist"
    task = "regression"

    def value(self, t):
        r = np.maximum(np.abs(np.asarray(t, dtype=float)) - self.mu, 0.0)
        return 0.5 * r * r

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.sign(t) * np.maximum(np.abs(t) - self.mu, 0.0)

    def conjugate(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * s * s + self.mu * np.abs(s)

    def flat_interval(self):
        return (-self.mu, self.mu) if self.mu > 0 else None


class SafeLogistic(ScalarLoss):
    """Smooth classification loss exp(t+mu-1) - (t+mu) below t = 1-mu, else 0.

    Behaves like a logistic-type loss for small margins (asymptotically
    linear) but vanishes identically once the margin exceeds 1 - mu.
    No closed-form conjugate is exposed; ``conjugate`` evaluates the grid
    supremum and is flagged approximate.
    """

    kind = "safelog"
    task = "classification"
    conjugate_exact = False

    def value(self, t):
        u = np.asarray(t, dtype=float) + self.mu - 1.0
        return np.where(u <= 0, np.exp(np.minimum(u, 0.0)) - u - 1.0, 0.0)

    def derivative(self, t):
        u = np.asarray(t, dtype=float) + self.mu - 1.0
        return np.where(u <= 0, np.expm1(np.minimum(u, 0.0)), 0.0)

    def conjugate(self, s):
        return _grid_conjugate(self.value, s)

    def flat_interval(self):
        return (1.0 - self.mu, math.inf)


class Hinge(ScalarLoss):
    """Hinge loss max(1 - t - mu, 0); the classical hinge when mu = 0.

    Not differentiable at the kink; ``derivative`` picks the zero (flat side)
    subgradient there, which keeps dual candidates inside dom of the
    conjugate and first-order cuts valid.
    """

    kind = "hinge"
    task = "classification"
    smooth = False

    def value(self, t):
        return np.maximum(1.0 - np.asarray(t, dtype=float) - self.mu, 0.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 1.0 - self.mu, -1.0, 0.0)

    def conjugate(self, s):
        s = np.asarray(s, dtype=float)
        ok = (s >= -1.0 - _DOM_TOL) & (s <= _DOM_TOL)
        return np.where(ok, (1.0 - self.mu) * s, np.inf)

    def flat_interval(self):
        return (1.0 - self.mu, math.inf)


class SquaredHinge(ScalarLoss):
    """Squared hinge max(1 - t - mu, 0)^2 / 2 with a margin threshold."""

    kind = "sqhinge"
    task = "classification"

    def value(self, t):
        r = np.maximum(1.0 - np.asarray(t, dtype=float) - self.mu, 0.0)
        return 0.5 * r * r

    def derivative(self, t):
        return -np.maximum(1.0 - np.asarray(t, dtype=float) - self.mu, 0.0)

    def conjugate(self, s):
        s = np.asarray(s, dtype=float)
        ok = s <= _DOM_TOL
        return np.where(ok, (1.0 - self.mu) * s + 0.5 * s * s, np.inf)

    def flat_interval(self):
        return (1.0 - self.mu, math.inf)


class Huber(ScalarLoss):
    """Huber loss: t^2/(2 mu) for |t| <= mu, |t| - mu/2 beyond.

    The quadratically smoothed absolute loss.  Its only zero is t = 0, so it
    is smooth and robust but not safe (no flat interval).
    """

    kind = "huber"
    task = "regression"

    def __post_init__(self):
        super().__post_init__()
        if self.mu <= 0:
            raise ValueError("the Huber loss needs mu > 0")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        return np.where(a <= self.mu, 0.5 * t * t / self.mu, a - 0.5 * self.mu)

    def derivative(self, t):
        return np.clip(np.asarray(t, dtype=float) / self.mu, -1.0, 1.0)

    def conjugate(self, s):
        s = np.asarray(s, dtype=float)
        ok = np.abs(s) <= 1.0 + _DOM_TOL
        return np.where(ok, 0.5 * self.mu * s * s, np.inf)


class PlainLogistic(ScalarLoss):
    """Logistic loss log(1 + exp(-t))."""

    kind = "logistic"
    task = "classification"

    def __post_init__(self):
        super().__post_init__()
        if self.mu != 0:
            raise ValueError("the plain logistic loss takes no threshold")

    def value(self, t):
        return np.logaddexp(0.0, -np.asarray(t, dtype=float))

    def derivative(self, t):
        # -sigmoid(-t), stable on both tails
        return -expit(-np.asarray(t, dtype=float))

    def conjugate(self, s):
        s = np.asarray(s, dtype=float)
        ok = (s >= -1.0 - _DOM_TOL) & (s <= _DOM_TOL)
        a = np.clip(-s, 0.0, 1.0)
        ent = _xlogx(a) + _xlogx(1.0 - a)
        return np.where(ok, ent, np.inf)


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x * np.log(np.maximum(x, 1e-300)), 0.0)


def _grid_conjugate(value_fn, s, lo=-10.0, hi=10.0, num=100001):
    """Grid supremum sup_t s*t - value(t), +inf when it peaks on the boundary."""
    s = np.asarray(s, dtype=float)
    t = np.linspace(lo, hi, num)
    ft = value_fn(t)
    flat_s = np.atleast_1d(s)
    out = np.empty(flat_s.shape, dtype=float)
    chunk = max(1, int(2e6) // num)
    for start in range(0, flat_s.size, chunk):
        block = flat_s[start:start + chunk, None]
        vals = block * t[None, :] - ft[None, :]
        idx = np.argmax(vals, axis=1)
        best = vals[np.arange(len(idx)), idx]
        best[(idx == 0) | (idx == num - 1)] = np.inf
        out[start:start + chunk] = best
    return out.reshape(s.shape) if s.shape else float(out[0])


LOSS_IDS = {
    "sqdist": SquareDistance,
    "safelog": SafeLogistic,
    "hinge": Hinge,
    "sqhinge": SquaredHinge,
    "huber": Huber,
    "square": PlainSquare,
    "logistic": PlainLogistic,
}


def make_loss(kind, mu=0.0):
    """Build a loss from its string identifier."""
    try:
        cls = LOSS_IDS[kind]
    except KeyError:
        raise ValueError(f"unknown loss {kind!r}; valid: {sorted(LOSS_IDS)}")
    return cls(mu=mu)


# ---------------------------------------------------------------------------
# flattening oracle


def inf_conv_oracle(f, omega_conj, mu, t, lo=-10.0, hi=10.0, num=100001,
                    refine=2001):
    """Grid evaluation of min_z f(z) + mu * omega_conj((t - z) / mu).

    This is the independent oracle used to validate every flattened closed
    form; it never short-circuits through any of the loss classes.  A coarse
    pass locates the minimizer and a second pass refines between its grid
    neighbours.  Raises :class:`GridBoundaryError` when the coarse minimizer
    hits the grid boundary (the grid was too small).
    """
    if mu <= 0:
        raise ValueError("mu must be positive")

    def objective(z):
        return np.asarray(f(z), dtype=float) + mu * np.asarray(
            omega_conj((t - z) / mu), dtype=float)

    z = np.linspace(lo, hi, num)
    vals = objective(z)
    finite = np.isfinite(vals)
    if not finite.any():
        raise GridBoundaryError(f"no feasible grid point for t={t}")
    idx = int(np.argmin(np.where(finite, vals, np.inf)))
    if idx in (0, num - 1):
        raise GridBoundaryError(
            f"minimizer at grid boundary for t={t}; widen [{lo}, {hi}]")
    best = float(vals[idx])
    if refine:
        zf = np.linspace(z[idx - 1], z[idx + 1], refine)
        vf = objective(zf)
        vf = vf[np.isfinite(vf)]
        if vf.size:
            best = min(best, float(vf.min()))
    return best


def _linf_ball(y):
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) <= 1.0, 0.0, np.inf)


def _halfline(y):
    y = np.asarray(y, dtype=float)
    return np.where(y >= -1.0, 0.0, np.inf)


def smoothing_pair(kind):
    """Base loss and penalty-conjugate whose flattening gives the closed form.

    Returns a pair of callables ``(f, omega_conj)`` such that
    ``inf_conv_oracle(f, omega_conj, mu, t)`` reproduces ``value(t)`` of the
    loss kind at parameter mu.
    """
    if kind == "sqdist":
        return (lambda z: 0.5 * np.asarray(z, float) ** 2), _linf_ball
    if kind == "hinge":
        return (lambda z: np.abs(1.0 - np.asarray(z, float))), _halfline
    if kind == "sqhinge":
        return (lambda z: 0.5 * (1.0 - np.asarray(z, float)) ** 2), _halfline
    if kind == "safelog":
        # exponential-linear base: convex, asymptotically linear on the left,
        # and its one-sided flattening vanishes exactly above 1 - mu
        return (lambda z: np.exp(np.asarray(z, float) - 1.0)
                - np.asarray(z, float)), _halfline
    if kind == "huber":
        return (lambda z: np.abs(np.asarray(z, float))), (
            lambda y: 0.5 * np.asarray(y, float) ** 2)
    raise ValueError(f"no smoothing pair for loss kind {kind!r}")


# ---------------------------------------------------------------------------
# penalties


class L1Penalty:
    """l1 norm; prox is the soft threshold, conjugate the l-inf ball."""

    pid = "l1"
    smooth = False
    strong_convexity = 0.0

    def value(self, x):
        return float(np.abs(x).sum())

    def prox(self, x, step):
        if step < 0:
            raise ValueError("step must be nonnegative")
        return np.sign(x) * np.maximum(np.abs(x) - step, 0.0)

    def conjugate(self, y):
        m = float(np.abs(np.asarray(y)).max(initial=0.0))
        return 0.0 if m <= 1.0 + _DOM_TOL else math.inf

    def conj_feasible_scale(self, y):
        m = float(np.abs(np.asarray(y)).max(initial=0.0))
        return 1.0 if m <= 1.0 else 1.0 / m

    def subgrad(self, x):
        # minimum-norm element: 0 on the zero coordinates
        return np.sign(x)

    def __repr__(self):
        return "L1Penalty()"


class SquaredL2Penalty:
    """Half squared l2 norm ||x||^2 / 2 (self-conjugate, 1-strongly convex)."""

    pid = "l2"
    smooth = True
    strong_convexity = 1.0

    def value(self, x):
        return 0.5 * float(x @ x)

    def prox(self, x, step):
        if step < 0:
            raise ValueError("step must be nonnegative")
        return x / (1.0 + step)

    def conjugate(self, y):
        return 0.5 * float(y @ y)

    def conj_feasible_scale(self, y):
        return 1.0

    def subgrad(self, x):
        return x

    def __repr__(self):
        return "SquaredL2Penalty()"


class QuadFormPenalty:
    """Quadratic form x.T K x for a PSD matrix K (kernelized problems).

    Smooth-only: solvers fold its gradient 2 K x into the smooth part, and no
    conjugate is exposed (duality gaps are unavailable through it).
    """

    pid = "quadform"
    smooth = True
    strong_convexity = 0.0

    def __init__(self, K):
        self.K = np.asarray(K, dtype=float)

    def value(self, x):
        return float(x @ (self.K @ x))

    def prox(self, x, step):
        raise NotImplementedError("quadratic-form penalty is smooth-only")

    def conjugate(self, y):
        raise NotImplementedError("no conjugate for the quadratic-form penalty")

    def subgrad(self, x):
        return 2.0 * (self.K @ x)

    def __repr__(self):
        return f"QuadFormPenalty(n={self.K.shape[0]})"


PENALTY_IDS = {"l1": L1Penalty, "l2": SquaredL2Penalty}


def make_penalty(pid):
    """Build a penalty from its string identifier."""
    try:
        return PENALTY_IDS[pid]()
    except KeyError:
        raise ValueError(f"unknown penalty {pid!r}; valid: {sorted(PENALTY_IDS)}")
