"""Losses: closed forms against the flattening oracle, conjugates, penalties."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safescreen import (Hinge, Huber, L1Penalty, PlainLogistic, PlainSquare,
                        SafeLogistic, SquareDistance, SquaredHinge,
                        SquaredL2Penalty, inf_conv_oracle, make_loss,
                        smoothing_pair)
from safescreen.losses import GridBoundaryError

from conftest import central_diff

SAFE_KINDS = ["sqdist", "safelog", "hinge", "sqhinge"]
ALL_KINDS = SAFE_KINDS + ["huber", "square", "logistic"]


def _make(kind, mu):
    if kind in ("square", "logistic"):
        return make_loss(kind)
    return make_loss(kind, mu=mu)


# ---------------------------------------------------------------------------
# spot values


def test_sqdist_spot_values():
    loss = SquareDistance(mu=1.0)
    assert loss.value(0.5) == 0.0
    assert loss.value(2.0) == pytest.approx(0.5, abs=1e-12)
    assert loss.derivative(0.0) == 0.0
    assert loss.derivative(2.0) == pytest.approx(1.0, abs=1e-12)


def test_safelogistic_spot_values():
    loss = SafeLogistic(mu=1.0)
    assert loss.value(0.0) == pytest.approx(0.0, abs=1e-15)
    assert loss.value(5.0) == 0.0
    assert loss.derivative(-1.0) == pytest.approx(math.exp(-1) - 1, abs=1e-12)


def test_huber_spot_values():
    loss = Huber(mu=1.0)
    assert loss.value(2.0) == pytest.approx(1.5, abs=1e-12)
    assert loss.value(0.5) == pytest.approx(0.125, abs=1e-12)


def test_conjugate_spot_values():
    assert PlainSquare().conjugate(3.0) == pytest.approx(4.5)
    assert SquaredHinge(mu=0.0).conjugate(-1.0) == pytest.approx(-0.5)
    assert PlainLogistic().conjugate(0.0) == pytest.approx(0.0, abs=1e-12)
    assert PlainLogistic().conjugate(-0.5) == pytest.approx(
        2 * 0.5 * math.log(0.5), abs=1e-12)
    assert np.isinf(PlainLogistic().conjugate(0.5))
    assert np.isinf(SquaredHinge(mu=0.3).conjugate(1.0))


# ---------------------------------------------------------------------------
# the flattening oracle is the source of truth for every closed form


def test_oracle_spot_values():
    f, oc = smoothing_pair("sqdist")
    assert inf_conv_oracle(f, oc, 1.0, 0.0) == pytest.approx(0.0, abs=1e-9)
    assert inf_conv_oracle(f, oc, 1.0, 2.0) == pytest.approx(0.5, abs=1e-4)
    f, oc = smoothing_pair("huber")
    assert inf_conv_oracle(f, oc, 1.0, 0.5) == pytest.approx(0.125, abs=1e-4)


def test_oracle_grid_boundary_detection():
    f, oc = smoothing_pair("huber")
    # true minimizer z = 4 sits beyond the grid end
    with pytest.raises(GridBoundaryError):
        inf_conv_oracle(f, oc, 1.0, 5.0, lo=-2.0, hi=2.0)
    f, oc = smoothing_pair("sqdist")
    # every grid point violates the indicator: no feasible value at all
    with pytest.raises(GridBoundaryError):
        inf_conv_oracle(f, oc, 1.0, 9.0, lo=-2.0, hi=2.0)
    with pytest.raises(ValueError):
        inf_conv_oracle(f, oc, 0.0, 1.0)


@pytest.mark.parametrize("kind", SAFE_KINDS + ["huber"])
@pytest.mark.parametrize("mu", [0.3, 1.0])
def test_closed_forms_match_oracle(kind, mu):
    loss = make_loss(kind, mu=mu)
    f, oc = smoothing_pair(kind)
    for t in np.linspace(-5.0, 5.0, 100):
        want = inf_conv_oracle(f, oc, mu, float(t))
        assert loss.value(float(t)) == pytest.approx(want, abs=1e-4), (kind, t)


# ---------------------------------------------------------------------------
# flat regions


@pytest.mark.parametrize("kind", SAFE_KINDS)
@pytest.mark.parametrize("mu", [0.25, 1.0])
def test_flat_region_exactness(kind, mu):
    loss = make_loss(kind, mu=mu)
    lo, hi = loss.flat_interval()
    inner = np.linspace(lo if math.isfinite(lo) else hi - 3,
                        hi if math.isfinite(hi) else lo + 7, 50)
    assert np.all(loss.value(inner) == 0.0)
    assert np.all(loss.derivative(inner[1:-1]) == 0.0)
    outside = []
    if math.isfinite(lo):
        outside += [lo - 1e-6, lo - 0.5]
    if math.isfinite(hi):
        outside += [hi + 1e-6, hi + 0.5]
    for t in outside:
        assert loss.value(t) > 0.0


@pytest.mark.parametrize("kind,safe", [("sqdist", True), ("safelog", True),
                                       ("hinge", True), ("sqhinge", True),
                                       ("huber", False), ("square", False),
                                       ("logistic", False)])
def test_safety_flags(kind, safe):
    loss = _make(kind, mu=0.5)
    assert loss.is_safe == safe


def test_mu_zero_recovers_plain_losses():
    t = np.linspace(-3, 3, 101)
    np.testing.assert_allclose(SquareDistance(mu=0.0).value(t),
                               PlainSquare().value(t), atol=0)
    np.testing.assert_allclose(Hinge(mu=0.0).value(t),
                               np.maximum(1 - t, 0.0), atol=0)
    assert SquareDistance(mu=0.0).flat_interval() is None


# ---------------------------------------------------------------------------
# derivatives and conjugates


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_derivative_matches_finite_differences(kind, rng):
    loss = _make(kind, mu=0.7)
    kinks = {-0.7, 0.7, 0.3, 1.0, -1.0}  # flat boundaries across kinds
    ts = [t for t in rng.uniform(-4, 4, 60)
          if min(abs(t - kk) for kk in kinks) > 1e-2]
    for t in ts:
        fd = central_diff(lambda u: float(loss.value(u)), float(t))
        assert abs(float(loss.derivative(t)) - fd) <= 1e-6, (kind, t)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_fenchel_young(kind, rng):
    loss = _make(kind, mu=0.4)
    ts = rng.uniform(-3, 3, 25)
    ss_ = rng.uniform(-1, 1, 25)
    for t in ts:
        vt = float(loss.value(t))
        for s in ss_:
            cs = float(loss.conjugate(s))
            if math.isfinite(cs):
                assert vt + cs >= t * s - 1e-9
        s_star = float(loss.derivative(t))
        c_star = float(loss.conjugate(s_star))
        tol = 1e-8 if loss.conjugate_exact else 2e-4
        assert abs(vt + c_star - t * s_star) <= tol, (kind, t)


@pytest.mark.parametrize("kind", ["sqdist", "hinge", "sqhinge", "huber",
                                  "square", "logistic"])
def test_exact_conjugates_match_grid_supremum(kind, rng):
    """The closed-form conjugates agree with an independent grid supremum."""
    loss = _make(kind, mu=0.6)
    t = np.linspace(-30, 30, 200001)
    vt = loss.value(t)
    for s in rng.uniform(-0.95, -0.05, 12):  # interior of every dual domain
        grid = float(np.max(s * t - vt))
        closed = float(loss.conjugate(s))
        assert closed == pytest.approx(grid, abs=5e-4), (kind, s)


def test_sandwich_bounds_sqdist_vs_square(rng):
    """mu-flattening lowers the plain loss by at most max |grad| * mu."""
    mu = 0.8
    flat, plain = SquareDistance(mu=mu), PlainSquare()
    for t in rng.uniform(-5, 5, 200):
        upper = float(plain.value(t))
        delta = mu * abs(float(plain.derivative(t)))
        val = float(flat.value(t))
        assert val <= upper + 1e-12
        assert val >= upper - delta - 1e-12


def test_safelog_conjugate_is_approximate_and_bounded():
    loss = SafeLogistic(mu=0.5)
    assert not loss.conjugate_exact
    # inside the dual domain the grid supremum is finite, outside it diverges
    assert math.isfinite(float(loss.conjugate(-0.5)))
    assert np.isinf(float(loss.conjugate(0.5)))


# ---------------------------------------------------------------------------
# penalties


def test_l1_penalty_spot_values():
    pen = L1Penalty()
    np.testing.assert_allclose(pen.prox(np.array([2.0, -0.5]), 1.0),
                               [1.0, 0.0])
    assert pen.conjugate(np.array([0.5, -0.5])) == 0.0
    assert math.isinf(pen.conjugate(np.array([2.0, 0.0])))
    np.testing.assert_allclose(pen.subgrad(np.array([0.0, -2.0])), [0.0, -1.0])


def test_l2_penalty_spot_values():
    pen = SquaredL2Penalty()
    assert pen.conjugate(np.array([3.0, 4.0])) == pytest.approx(12.5)
    np.testing.assert_allclose(pen.prox(np.array([2.0, -4.0]), 1.0),
                               [1.0, -2.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4),
       st.floats(0.01, 3.0))
def test_moreau_identity(xs, eta):
    """prox of the penalty and prox of its conjugate decompose the identity."""
    x = np.asarray(xs)
    l1 = L1Penalty()
    np.testing.assert_allclose(
        l1.prox(x, eta) + np.clip(x, -eta, eta), x, atol=1e-12)
    l2 = SquaredL2Penalty()
    # prox of the conjugate (also half squared l2) at x/eta is x/(1+eta)
    np.testing.assert_allclose(
        l2.prox(x, eta) + eta * (x / (1.0 + eta)), x, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4), st.floats(0.05, 2.0))
def test_prox_matches_scalar_minimization(x, eta):
    """Brute-force argmin of the prox objective agrees with the formulas."""
    z = np.linspace(-10, 10, 200001)
    for pen in (L1Penalty(), SquaredL2Penalty()):
        direct = z[np.argmin(0.5 * (z - x) ** 2 + eta * np.abs(z))] \
            if isinstance(pen, L1Penalty) else \
            z[np.argmin(0.5 * (z - x) ** 2 + eta * 0.5 * z * z)]
        got = float(pen.prox(np.array([x]), eta)[0])
        assert got == pytest.approx(float(direct), abs=2e-4)
