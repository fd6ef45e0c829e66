"""Regions: ellipsoid updates vs a dense reference, closed-form maxima vs
brute force, initialization strategies, serialization."""

import io
import math

import numpy as np
import pytest

from safescreen import (BallRegion, EllipsoidRegion, OpCounter, build_region,
                        ellipsoid_step, gap_ball_radius, init_ball,
                        region_contains, region_from_json, region_max_linear,
                        region_to_json, solve)
from safescreen.region import EllipsoidDegenerateError

from conftest import random_problem


def dense_step(E, z, g):
    """Textbook ellipsoid update on a materialized matrix (reference only)."""
    p = len(z)
    gt = g / math.sqrt(g @ E @ g)
    z_new = z - (E @ gt) / (p + 1)
    E_new = (p * p / (p * p - 1.0)) * (E - (2.0 / (p + 1)) * np.outer(E @ gt, E @ gt))
    return E_new, z_new


def random_region(rng, p, k, with_cut=True, r0=2.0):
    """Random valid low-rank region produced by actual ellipsoid steps."""
    region = EllipsoidRegion.from_ball(BallRegion(rng.normal(size=p), r0))
    for _ in range(k):
        region = ellipsoid_step(region, rng.normal(size=p))
    if with_cut:
        region = EllipsoidRegion(
            center=region.center, scale=region.scale, factors=region.factors,
            weights=region.weights, cut=rng.normal(size=p),
            init_radius=region.init_radius, steps=region.steps)
    return region


def test_single_step_worked_example():
    ball = BallRegion(np.zeros(2), 1.0)
    region = ellipsoid_step(ball, np.array([1.0, 0.0]))
    np.testing.assert_allclose(region.center, [-1.0 / 3.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(region.to_dense(),
                               np.diag([4.0 / 9.0, 4.0 / 3.0]), atol=1e-15)
    assert region.scale == pytest.approx(4.0 / 3.0)
    np.testing.assert_allclose(region.weights, [8.0 / 9.0])
    np.testing.assert_allclose(region.factors[:, 0], [1.0, 0.0])


def test_steps_match_dense_reference(rng):
    p = 7
    E = 4.0 * np.eye(p)
    z = rng.normal(size=p)
    region = EllipsoidRegion.from_ball(BallRegion(z, 2.0))
    for _ in range(25):
        g = rng.normal(size=p)
        E, z = dense_step(E, z, g)
        region = ellipsoid_step(region, g)
        np.testing.assert_allclose(region.center, z, atol=1e-12)
        rel = np.abs(region.to_dense() - E).max() / np.abs(E).max()
        assert rel < 1e-10


def test_matvec_quad_match_dense(rng):
    region = random_region(rng, p=12, k=9)
    E = region.to_dense()
    for _ in range(5):
        v = rng.normal(size=12)
        np.testing.assert_allclose(region.matvec(v), E @ v, rtol=1e-10,
                                   atol=1e-12)
        assert region.quad(v) == pytest.approx(float(v @ E @ v), rel=1e-10)


def test_det_decreases_every_step(rng):
    region = EllipsoidRegion.from_ball(BallRegion(np.zeros(5), 1.5))
    prev = region.logdet()
    for _ in range(20):
        region = ellipsoid_step(region, rng.normal(size=5))
        cur = region.logdet()
        assert cur < prev
        # cross-check the factored logdet against the dense determinant
        assert cur == pytest.approx(np.linalg.slogdet(region.to_dense())[1],
                                    abs=1e-8)
        prev = cur


def test_step_rejects_bad_inputs():
    ball = BallRegion(np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        ellipsoid_step(ball, np.zeros(3))
    with pytest.raises(ValueError):
        ellipsoid_step(BallRegion(np.zeros(1), 1.0), np.ones(1))
    bad = EllipsoidRegion(center=np.zeros(2), scale=1.0,
                          factors=np.array([[1.0], [0.0]]),
                          weights=np.array([2.0]))  # E = diag(-1, 1)
    with pytest.raises(EllipsoidDegenerateError):
        ellipsoid_step(bad, np.array([1.0, 0.0]))


def test_min_eigenvalue_reduced_problem(rng):
    region = random_region(rng, p=10, k=6, with_cut=False)
    want = float(np.linalg.eigvalsh(region.to_dense()).min())
    assert region.min_eigenvalue() == pytest.approx(want, rel=1e-10)


# ---------------------------------------------------------------------------
# init strategies


def test_init_ball_strategies():
    x0 = np.zeros(3)
    assert init_ball(x0, "strong_convexity", bound=2.0, kappa=4.0).radius \
        == pytest.approx(1.0)
    assert init_ball(x0, "explicit", radius=10.0).radius == 10.0
    assert init_ball(x0, "gap", gap=0.0, kappa=1.0).radius == 0.0
    with pytest.raises(ValueError):
        init_ball(x0, "gap", gap=1.0, kappa=0.0)
    with pytest.raises(ValueError):
        init_ball(x0, "strong_convexity", bound=1.0, kappa=0.0)
    with pytest.raises(ValueError):
        init_ball(x0, "explicit", radius=0.0)


def test_gap_ball_radius_rules():
    assert gap_ball_radius("gap_over_lambda", gap=0.5, lam=0.1) \
        == pytest.approx(10.0)
    assert gap_ball_radius("sqrt", gap=0.5, kappa=0.1) \
        == pytest.approx(math.sqrt(10.0))
    with pytest.raises(ValueError):
        gap_ball_radius("sqrt", gap=math.inf, kappa=1.0)


def test_build_region_rejects_zero_radius(rng):
    prob = random_problem(rng)
    with pytest.raises(ValueError):
        build_region(prob, np.zeros(prob.p), 0.0, 5)
    with pytest.raises(ValueError):
        build_region(prob, np.zeros(prob.p), 1.0, 0)


def test_build_region_zero_subgradient_collapses(rng):
    # mu huge: everything flat at 0 and l1 subgradient at 0 is chosen as 0
    prob = random_problem(rng, loss_kind="sqdist", mu=100.0, lam=0.5)
    region = build_region(prob, np.zeros(prob.p), 1.0, 5)
    assert isinstance(region, BallRegion)
    assert region.radius == 0.0


def test_build_region_single_step_matches_manual(rng):
    prob = random_problem(rng, n=12, p=3, penalty_kind="l2", mu=0.1, lam=0.3)
    x0 = rng.normal(size=3)
    g0 = prob.subgradient(x0)
    manual = ellipsoid_step(BallRegion(x0, 2.0), g0)
    built = build_region(prob, x0, 2.0, 1)
    np.testing.assert_allclose(built.center, manual.center, atol=1e-13)
    np.testing.assert_allclose(built.to_dense(), manual.to_dense(), atol=1e-12)
    np.testing.assert_allclose(built.cut, prob.subgradient(built.center))


def test_build_region_quadratic_optimum_stays_put(rng):
    # b = 0 makes x* = 0 exactly; the zero gradient short-circuits the build
    A = rng.normal(size=(30, 4))
    prob = random_problem(rng, n=30, p=4, loss_kind="square", mu=0.0,
                          penalty_kind="l2", lam=0.2)
    from safescreen import Dataset, ErmProblem
    prob = ErmProblem(Dataset(A, np.zeros(30), "regression"), prob.loss,
                      prob.penalty, prob.lam)
    x_star = np.zeros(4)
    region = build_region(prob, x_star, 1.0, 10)
    assert isinstance(region, BallRegion)
    np.testing.assert_allclose(region.center, x_star, atol=0)


# ---------------------------------------------------------------------------
# closed-form maxima


def test_max_linear_spot_examples():
    ball = EllipsoidRegion(center=np.zeros(2), scale=1.0,
                           factors=np.zeros((2, 0)), weights=np.zeros(0))
    assert region_max_linear(ball, np.array([2.0, 0.0])) == pytest.approx(2.0)
    cut = EllipsoidRegion(center=np.zeros(2), scale=1.0,
                          factors=np.zeros((2, 0)), weights=np.zeros(0),
                          cut=np.array([1.0, 0.0]))
    assert region_max_linear(cut, np.array([1.0, 1.0])) == pytest.approx(1.0)
    assert region_max_linear(cut, np.array([2.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    assert region_max_linear(BallRegion(np.zeros(2), 3.0),
                             np.array([0.0, 2.0]), offset=1.0) \
        == pytest.approx(5.0)


def brute_force_max(region, a, offset, rng, n_samples=200000):
    """Sampling oracle: boundary + interior points, cap-refined around the
    incumbent.  Never consults the closed form."""
    p = region.p
    E = region.to_dense()
    C = np.linalg.cholesky(E)

    def feasible_values(U):
        pts_rel = U @ C.T
        if region.cut is not None:
            keep = pts_rel @ region.cut <= 0
            U, pts_rel = U[keep], pts_rel[keep]
        if not len(U):
            return None, None
        vals = (region.center + pts_rel) @ a - offset
        i = int(np.argmax(vals))
        return float(vals[i]), U[i]

    U = rng.standard_normal((n_samples, p))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    interior = U[: n_samples // 10] * (rng.random(n_samples // 10) ** (1.0 / p))[:, None]
    best, best_u = feasible_values(U)
    vi, _ = feasible_values(interior)
    if vi is not None:
        best = max(best, vi)
    for rad in (0.3, 0.03, 0.003):
        V = best_u + rad * rng.standard_normal((30000, p))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        v, u = feasible_values(V)
        if v is not None and v > best:
            best, best_u = v, u
    return best


@pytest.mark.parametrize("with_cut", [False, True])
def test_max_linear_matches_brute_force(rng, with_cut):
    for trial in range(20):
        p = int(rng.integers(2, 6))
        region = random_region(rng, p=p, k=int(rng.integers(0, 4)),
                               with_cut=with_cut, r0=float(rng.uniform(0.5, 2)))
        a = rng.normal(size=p)
        a /= np.linalg.norm(a)
        offset = float(rng.normal())
        closed = region_max_linear(region, a, offset)
        sampled = brute_force_max(region, a, offset, rng)
        assert closed >= sampled - 1e-9
        assert closed == pytest.approx(sampled, abs=2e-3)


def test_cut_never_increases_maximum(rng):
    for _ in range(20):
        p = int(rng.integers(2, 8))
        region = random_region(rng, p=p, k=3, with_cut=True)
        free = EllipsoidRegion(center=region.center, scale=region.scale,
                               factors=region.factors, weights=region.weights)
        a = rng.normal(size=p)
        assert region_max_linear(region, a) <= region_max_linear(free, a) + 1e-12


def test_ball_point_region_is_margin_test(rng):
    z = rng.normal(size=4)
    point = BallRegion(z, 0.0)
    a = rng.normal(size=4)
    assert region_max_linear(point, a, 0.3) == pytest.approx(float(a @ z) - 0.3)


def test_max_linear_cost_is_low_rank(rng):
    region = random_region(rng, p=50, k=10, with_cut=True)
    ops = OpCounter()
    region_max_linear(region, rng.normal(size=50), 0.0, ops=ops)
    assert ops.madds <= 8 * 50 * (10 + 1)


# ---------------------------------------------------------------------------
# containment and serialization


def test_region_contains(rng):
    region = random_region(rng, p=5, k=4, with_cut=False)
    inside, q, cut_ok = region_contains(region, region.center)
    assert inside and q <= 1e-12 and cut_ok
    E = region.to_dense()
    lam_min = np.linalg.eigvalsh(E).min()
    far = region.center + 10 * math.sqrt(max(lam_min, 1e-12)) * np.ones(5)
    outside, q_out, _ = region_contains(region, far)
    assert not outside and q_out > 1.0


def test_region_serialization_roundtrip(rng):
    region = random_region(rng, p=6, k=4, with_cut=True)
    doc = region_to_json(region)
    back = region_from_json(doc)
    np.testing.assert_array_equal(back.center, region.center)
    np.testing.assert_array_equal(back.factors, region.factors)
    np.testing.assert_array_equal(back.weights, region.weights)
    np.testing.assert_array_equal(back.cut, region.cut)
    assert back.scale == region.scale
    assert back.steps == region.steps

    ball = BallRegion(rng.normal(size=3), 2.5)
    buf = io.StringIO()
    region_to_json(ball, buf)
    back = region_from_json(io.StringIO(buf.getvalue()))
    assert isinstance(back, BallRegion)
    np.testing.assert_array_equal(back.center, ball.center)
    assert back.radius == ball.radius


def test_region_serialization_file_roundtrip(rng, tmp_path):
    region = random_region(rng, p=4, k=2, with_cut=True)
    path = tmp_path / "region.json"
    region_to_json(region, path)
    back = region_from_json(path)
    np.testing.assert_array_equal(back.center, region.center)
