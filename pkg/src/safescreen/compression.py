"""Dataset compression: delete samples ranked by screening score and refit.

Screening scores order samples by how certainly irrelevant they are, so
deleting from the top compresses the dataset while provably preserving the
model up to the safely-screened fraction.  Refits keep the full-count 1/n
normalization (deletion is masking), which is what makes that guarantee
exact; beyond the safe fraction the curves measure graceful degradation
against margin-ranked and random deletion baselines.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .region import BallRegion, build_region, init_ball
from .screening import screen
from .solver import solve

__all__ = ["CompressionCurve", "rank_samples", "compression_curve",
           "evaluate_metric"]

METHODS = ("screening", "margin", "random")


def rank_samples(report):
    """Sample indices by descending score (most screenable first).

    Ties break by ascending index so rankings are deterministic.
    """
    scores = np.asarray(report.scores, dtype=float)
    if np.isnan(scores).any():
        raise ValueError("scores contain NaN")
    return np.lexsort((np.arange(scores.size), -scores))


def evaluate_metric(prob, x, test_ds):
    """Classification accuracy or regression R^2 on a held-out dataset."""
    pred = np.asarray(test_ds.A @ x).ravel()
    if test_ds.task == "classification":
        signs = np.where(pred >= 0, 1.0, -1.0)
        return float(np.mean(signs == test_ds.b))
    resid = test_ds.b - pred
    denom = float(np.sum((test_ds.b - test_ds.b.mean()) ** 2))
    if denom == 0:
        return 1.0 if float(resid @ resid) == 0 else -math.inf
    return 1.0 - float(resid @ resid) / denom


@dataclass
class CompressionCurve:
    """Mean/std of the test metric per deletion fraction and method."""

    fractions: np.ndarray
    metric: str
    means: dict
    stds: dict
    n_train: np.ndarray
    seeds: int
    warnings: list = field(default_factory=list)

    def to_csv(self, path_or_file):
        import csv

        def _write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fraction", "method", "mean", "std", "n_train"])
            for method in sorted(self.means):
                for f, m, s, nt in zip(self.fractions, self.means[method],
                                       self.stds[method], self.n_train):
                    w.writerow([format(float(f), ".17g"), method,
                                format(float(m), ".17g"),
                                format(float(s), ".17g"), int(nt)])
        if hasattr(path_or_file, "write"):
            _write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                _write(fh)


def _screening_ranking(prob, x_early, steps, init_radius):
    if prob.kappa > 0:
        gap = prob.duality_gap(x_early)
        ball = init_ball(x_early, "gap", gap=gap, kappa=prob.kappa)
    elif init_radius is not None:
        ball = init_ball(x_early, "explicit", radius=init_radius)
    else:
        raise ValueError("init_radius is required without strong convexity")
    if ball.radius > 0:
        region = build_region(prob, x_early, ball.radius, steps)
    else:
        region = BallRegion(x_early, 0.0)
    return rank_samples(screen(prob, region))


def _margin_ranking(prob, x_early):
    # margin distances at the early iterate = scores of the point region
    return rank_samples(screen(prob, BallRegion(x_early, 0.0)))


def compression_curve(prob, fractions, methods=METHODS, seeds=5,
                      test_fraction=0.2, steps=20, init_radius=None,
                      early_epochs=2, tol=1e-8, max_epochs=20000, seed0=0):
    """Delete growing fractions per method, refit, score on held-out data.

    Each seed draws its own train/test split; the random baseline also draws
    one deletion permutation per seed (so its subsets are nested across
    fractions and reproducible).  Fractions leaving fewer than p/2 training
    samples are skipped with a warning and reported as NaN.
    """
    fractions = np.asarray(fractions, dtype=float)
    if np.any(fractions < 0) or np.any(fractions > 0.95):
        raise ValueError("fractions must lie in [0, 0.95]")
    if np.any(np.diff(fractions) <= 0):
        raise ValueError("fractions must be strictly increasing")
    if seeds < 3:
        raise ValueError("at least 3 seeds are required")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")

    cells = {m: np.full((seeds, fractions.size), np.nan) for m in methods}
    n_train_out = np.zeros(fractions.size, dtype=int)
    warnings = []

    for s in range(seeds):
        from .datasets import train_test_split
        train_ds, test_ds = train_test_split(
            prob.dataset, test_fraction=test_fraction, seed=[seed0, s])
        tprob = replace(prob, dataset=train_ds, active=None)
        n_train = train_ds.n
        x_early = solve(tprob, tol=0.0, max_epochs=early_epochs).x

        rankings = {}
        if "screening" in methods:
            rankings["screening"] = _screening_ranking(
                tprob, x_early, steps, init_radius)
        if "margin" in methods:
            rankings["margin"] = _margin_ranking(tprob, x_early)
        if "random" in methods:
            rng = np.random.default_rng([seed0, s, 1])
            rankings["random"] = rng.permutation(n_train)

        for j, frac in enumerate(fractions):
            n_del = int(round(frac * n_train))
            n_keep = n_train - n_del
            n_train_out[j] = n_keep
            if n_keep < prob.p / 2:
                warnings.append(
                    f"fraction {frac:g} leaves {n_keep} < p/2 samples; skipped")
                continue
            for method in methods:
                keep = np.ones(n_train, dtype=bool)
                keep[rankings[method][:n_del]] = False
                res = solve(tprob.masked(keep), x0=x_early, tol=tol,
                            max_epochs=max_epochs)
                cells[method][s, j] = evaluate_metric(tprob, res.x, test_ds)

    metric = "accuracy" if prob.dataset.task == "classification" else "r2"
    means = {m: np.nanmean(cells[m], axis=0) for m in methods}
    stds = {m: np.nanstd(cells[m], axis=0) for m in methods}
    return CompressionCurve(fractions=fractions, metric=metric, means=means,
                            stds=stds, n_train=n_train_out, seeds=seeds,
                            warnings=sorted(set(warnings)))
