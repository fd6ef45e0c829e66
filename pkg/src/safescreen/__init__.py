"""Safe screening of training samples in empirical risk minimization.

Losses that are exactly zero on an interval force the corresponding dual
variables to zero at the optimum; samples whose margins provably stay inside
that interval over a region containing the optimum can therefore be dropped
before training without changing the solution.  This package provides the
flat-region losses, ellipsoidal test regions built by the ellipsoid method
in a low-rank form, closed-form screening tests, kernelized variants, and
the downstream uses: screened solves, regularization paths, and dataset
compression.
"""

from ._kernels import OpCounter, backend_name
from .compression import CompressionCurve, compression_curve, rank_samples
from .datasets import (gen_synthetic_classification, gen_synthetic_regression,
                       load_dataset, save_libsvm, train_test_split)
from .erm import AuditReport, Dataset, ErmProblem, audit_safety
from .kernels import GramProblem, cached_gram, gram_matrix, screen_kernel
from .losses import (Hinge, Huber, L1Penalty, PlainLogistic, PlainSquare,
                     QuadFormPenalty, SafeLogistic, ScalarLoss, SquareDistance,
                     SquaredHinge, SquaredL2Penalty, inf_conv_oracle,
                     make_loss, make_penalty, smoothing_pair)
from .region import (BallRegion, EllipsoidRegion, build_region, ellipsoid_step,
                     gap_ball_radius, init_ball, region_contains,
                     region_from_json, region_max_linear, region_to_json)
from .screening import (ScreeningReport, screen, screen_classification,
                        screen_regression, screen_with_gap_ball)
from .solver import (PathResult, SolveResult, lambda_grid, regularization_path,
                     solve, solve_screened)

__version__ = "0.1.0"

__all__ = [
    "OpCounter", "backend_name",
    "CompressionCurve", "compression_curve", "rank_samples",
    "gen_synthetic_classification", "gen_synthetic_regression",
    "load_dataset", "save_libsvm", "train_test_split",
    "AuditReport", "Dataset", "ErmProblem", "audit_safety",
    "GramProblem", "cached_gram", "gram_matrix", "screen_kernel",
    "Hinge", "Huber", "L1Penalty", "PlainLogistic", "PlainSquare",
    "QuadFormPenalty", "SafeLogistic", "ScalarLoss", "SquareDistance",
    "SquaredHinge", "SquaredL2Penalty", "inf_conv_oracle", "make_loss",
    "make_penalty", "smoothing_pair",
    "BallRegion", "EllipsoidRegion", "build_region", "ellipsoid_step",
    "gap_ball_radius", "init_ball", "region_contains", "region_from_json",
    "region_max_linear", "region_to_json",
    "ScreeningReport", "screen", "screen_classification", "screen_regression",
    "screen_with_gap_ball",
    "PathResult", "SolveResult", "lambda_grid", "regularization_path",
    "solve", "solve_screened",
    "__version__",
]
