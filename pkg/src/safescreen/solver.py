"""Desk-scale solvers and the screening-accelerated regularization path.

Proximal gradient (FISTA-accelerated with monotone restarts by default)
handles every smooth loss; the hinge falls back to a projected subgradient
method.  Backtracking starts at step 1.0 and halves, so no Lipschitz
constant is ever estimated.

Cost accounting uses a nominal epoch model: one epoch is one pass of
margins-plus-gradient over the active samples.  A solver iteration on an
active fraction ``frac`` therefore costs ``frac`` epochs (extra backtracking
trials and duality-gap evaluations add half-passes), and a k-step ellipsoid
screen is charged k epoch-equivalents, matching the O(n s T + n p k)
complexity model of screened training.  Margins at accelerated extrapolation
points are affine recombinations of stored margins and cost no data pass.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .region import BallRegion, EllipsoidRegion, EllipsoidDegenerateError, \
    build_region, init_ball
from .screening import SCORE_TOL, screen

__all__ = ["SolveResult", "PathResult", "solve", "solve_screened",
           "regularization_path", "lambda_grid"]


@dataclass
class SolveResult:
    x: np.ndarray
    primal: float
    gap: float
    iterations: int
    epochs_equivalent: float
    converged: bool
    message: str = ""


def _has_prox(penalty):
    try:
        penalty.prox(np.zeros(1), 0.0)
        return True
    except NotImplementedError:
        return False


def solve(prob, x0=None, tol=1e-8, max_epochs=10000, accelerated=True,
          gap_check_every=10):
    """Minimize the problem to duality gap <= tol (absolute).

    When no duality gap is computable (approximate loss conjugate, or a
    penalty without a conjugate) the stop is a relative objective change
    below tol on three consecutive accepted steps.  Hitting ``max_epochs``
    returns the best iterate flagged ``converged=False``; ``tol=0`` never
    stops early, which is how fixed-budget warm starts are made.
    """
    x = np.zeros(prob.p) if x0 is None else np.asarray(x0, dtype=float).ravel().copy()
    if not prob.loss.smooth:
        return _solve_subgradient(prob, x, tol, max_epochs, gap_check_every)

    frac = prob.n_active / prob.n
    use_prox = _has_prox(prob.penalty)
    gap_available = prob.loss.conjugate_exact and use_prox
    lam = prob.lam
    epochs = 0.0

    def smooth_val(m, xv):
        v = float(prob.loss.value(m).sum()) / prob.n
        if not use_prox:
            v += lam * prob.penalty.value(xv)
        return v

    def full_val(sm, xv):
        return sm + (lam * prob.penalty.value(xv) if use_prox else 0.0)

    m_x = prob.margins(x)
    epochs += 0.5 * frac
    p_x = full_val(smooth_val(m_x, x), x)
    best_x, best_p = x.copy(), p_x
    x_prev, m_prev = x, m_x

    y, m_y = x, m_x
    t_mom = 1.0
    eta = 1.0
    gap = math.nan
    it = 0
    stall = 0
    converged = False
    message = ""

    while epochs < max_epochs:
        it += 1
        sm_y = smooth_val(m_y, y)
        g = prob.loss_gradient_from_margins(m_y)
        epochs += 0.5 * frac
        if not use_prox:
            g = g + lam * prob.penalty.subgrad(y)

        accepted = False
        while eta >= 1e-20:
            x_new = y - eta * g
            if use_prox:
                x_new = prob.penalty.prox(x_new, eta * lam)
            delta = x_new - y
            m_new = prob.margins(x_new)
            epochs += 0.5 * frac
            sm_new = smooth_val(m_new, x_new)
            bound = sm_y + float(g @ delta) + float(delta @ delta) / (2.0 * eta)
            if sm_new <= bound + 1e-12 * max(1.0, abs(sm_y)):
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            message = "backtracking step collapsed"
            break

        p_new = full_val(sm_new, x_new)
        if accelerated and p_new > p_x * (1 + 1e-15) + 1e-300:
            # momentum overshot: restart from the last monotone iterate
            t_mom = 1.0
            y, m_y = x, m_x
            continue

        rel_change = abs(p_new - p_x) / max(1.0, abs(p_x))
        x_prev, m_prev = x, m_x
        x, m_x, p_x = x_new, m_new, p_new
        if p_x < best_p:
            best_x, best_p = x.copy(), p_x

        if tol > 0:
            if gap_available:
                if it % gap_check_every == 0 or rel_change <= tol:
                    gap = prob.duality_gap(x)
                    epochs += 0.5 * frac
                    if math.isfinite(gap) and gap <= tol:
                        converged = True
                        break
            else:
                stall = stall + 1 if rel_change <= tol else 0
                if stall >= 3:
                    converged = True
                    break

        if accelerated:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
            beta = (t_mom - 1.0) / t_next
            y = x + beta * (x - x_prev)
            # margins are affine in x and the weights sum to one
            m_y = m_x + beta * (m_x - m_prev)
            t_mom = t_next
        else:
            y, m_y = x, m_x

    if p_x > best_p:
        x, p_x = best_x, best_p
    if gap_available and math.isnan(gap):
        gap = prob.duality_gap(x)
        epochs += 0.5 * frac
    if not converged and not message:
        message = f"epoch budget {max_epochs} reached"
    return SolveResult(x=x, primal=prob.primal(x), gap=gap, iterations=it,
                       epochs_equivalent=epochs, converged=converged,
                       message=message)


def _solve_subgradient(prob, x, tol, max_epochs, gap_check_every):
    """Projected subgradient with a diminishing step (nonsmooth losses)."""
    frac = prob.n_active / prob.n
    use_prox = _has_prox(prob.penalty)
    gap_available = prob.loss.conjugate_exact and use_prox
    lam = prob.lam
    epochs = 0.0
    it = 0
    best_x, best_p = x.copy(), math.inf
    gap = math.nan
    converged = False

    while epochs < max_epochs:
        it += 1
        m = prob.margins(x)
        epochs += 0.5 * frac
        p = float(prob.loss.value(m).sum()) / prob.n + lam * prob.penalty.value(x)
        if p < best_p:
            best_x, best_p = x.copy(), p
        g = prob.loss_gradient_from_margins(m)
        epochs += 0.5 * frac
        if not use_prox:
            g = g + lam * prob.penalty.subgrad(x)
        eta = 1.0 / (max(float(np.linalg.norm(g)), 1e-12) * math.sqrt(it))
        x = x - eta * g
        if use_prox:
            x = prob.penalty.prox(x, eta * lam)
        if tol > 0 and gap_available and it % gap_check_every == 0:
            gap = prob.duality_gap(best_x)
            epochs += frac
            if math.isfinite(gap) and gap <= tol:
                converged = True
                break

    if gap_available and math.isnan(gap):
        gap = prob.duality_gap(best_x)
        epochs += frac
    message = "" if converged else f"epoch budget {max_epochs} reached"
    return SolveResult(x=best_x, primal=prob.primal(best_x), gap=gap,
                       iterations=it, epochs_equivalent=epochs,
                       converged=converged, message=message)


def screening_charge(region):
    """Nominal epoch-equivalents of one batch screen over the given region."""
    if isinstance(region, EllipsoidRegion):
        return float(max(region.steps, 1))
    return 1.0


def solve_screened(prob, region, x0=None, tol=1e-8, max_epochs=10000,
                   screen_tol=SCORE_TOL, accelerated=True):
    """Screen over the region, then solve on the surviving samples.

    The masked problem keeps the original 1/n normalization, so a safe mask
    leaves the optimum unchanged.  Returns ``(SolveResult, ScreeningReport)``
    with the screen charged at its nominal epoch cost.
    """
    report = screen(prob, region, tol=screen_tol)
    masked = prob.masked(~report.screened)
    res = solve(masked, x0=x0, tol=tol, max_epochs=max_epochs,
                accelerated=accelerated)
    res = replace(res, epochs_equivalent=res.epochs_equivalent
                  + screening_charge(region))
    return res, report


@dataclass
class PathResult:
    """Warm-started solutions along a descending grid of penalties."""

    lambdas: np.ndarray
    results: list
    screened_counts: np.ndarray
    cumulative_epochs: np.ndarray
    screening: bool
    n_samples: int = 0

    def to_csv(self, path_or_file):
        import csv

        def _write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "primal", "gap", "screened_fraction",
                        "cumulative_epochs"])
            for lam, res, cnt, cum in zip(self.lambdas, self.results,
                                          self.screened_counts,
                                          self.cumulative_epochs):
                w.writerow([format(float(lam), ".17g"),
                            format(res.primal, ".17g"),
                            format(res.gap, ".17g"),
                            format(cnt / max(self.n_samples, 1), ".17g"),
                            format(float(cum), ".17g")])
        if hasattr(path_or_file, "write"):
            _write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                _write(fh)


def lambda_grid(lam_max, lam_min, per_decade=10):
    """Descending logarithmic grid with ``per_decade`` points per decade."""
    if lam_max <= lam_min:
        raise ValueError("lam_max must exceed lam_min")
    decades = math.log10(lam_max / lam_min)
    count = max(2, int(round(decades * per_decade)) + 1)
    return np.geomspace(lam_max, lam_min, count)


def regularization_path(prob, lambdas, screening=False, steps=20, tol=1e-8,
                        max_epochs=10000, init_radius=None, accelerated=True):
    """Solve along a strictly decreasing grid with warm starts.

    With ``screening=True`` each grid point first builds a ``steps``-step
    ellipsoid region around the previous solution (gap-sized ball for
    strongly convex objectives; ``init_radius`` otherwise) and solves on the
    surviving samples.  Screening failures at one grid point degrade to an
    unscreened solve there and the path continues.
    """
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    if lambdas.size == 0:
        raise ValueError("empty grid")
    if lambdas.size > 1 and not np.all(np.diff(lambdas) < 0):
        raise ValueError("the grid must be strictly decreasing")

    x = np.zeros(prob.p)
    results = []
    counts = np.zeros(lambdas.size, dtype=int)
    cumulative = np.zeros(lambdas.size)
    total = 0.0

    for j, lam in enumerate(lambdas):
        plam = replace(prob, lam=float(lam), active=None)
        res = None
        if screening:
            try:
                if plam.kappa > 0:
                    gap = plam.duality_gap(x)
                    total += 1.0
                    ball = init_ball(x, "gap", gap=gap, kappa=plam.kappa)
                elif init_radius is not None:
                    ball = init_ball(x, "explicit", radius=init_radius)
                else:
                    raise ValueError(
                        "init_radius is required without strong convexity")
                if ball.radius > 0:
                    region = build_region(plam, x, ball.radius, steps)
                else:
                    region = BallRegion(x, 0.0)
                res, report = solve_screened(
                    plam, region, x0=x, tol=tol, max_epochs=max_epochs,
                    accelerated=accelerated)
                counts[j] = report.n_screened
            except (ValueError, EllipsoidDegenerateError):
                res = None
        if res is None:
            res = solve(plam, x0=x, tol=tol, max_epochs=max_epochs,
                        accelerated=accelerated)
        results.append(res)
        x = res.x
        total += res.epochs_equivalent
        cumulative[j] = total

    return PathResult(lambdas=lambdas, results=results,
                      screened_counts=counts, cumulative_epochs=cumulative,
                      screening=screening, n_samples=prob.n)
