import numpy as np
import pytest

from safescreen import Dataset, ErmProblem, make_loss, make_penalty


def central_diff(fn, t, h=1e-5):
    return (fn(t + h) - fn(t - h)) / (2 * h)


def random_problem(rng, n=30, p=6, task="regression", loss_kind=None,
                   penalty_kind=None, mu=0.3, lam=0.05, sparse=False):
    A = rng.uniform(-1.0, 1.0, size=(n, p))
    if sparse:
        import scipy.sparse as sp
        A[rng.random(A.shape) < 0.5] = 0.0
        A = sp.csr_matrix(A)
    if task == "regression":
        b = rng.normal(size=n)
        loss_kind = loss_kind or "sqdist"
    else:
        b = rng.choice([-1.0, 1.0], size=n)
        loss_kind = loss_kind or "sqhinge"
    penalty_kind = penalty_kind or ("l1" if task == "regression" else "l2")
    ds = Dataset(A, b, task)
    if loss_kind in ("square", "logistic"):
        loss = make_loss(loss_kind)
    else:
        loss = make_loss(loss_kind, mu=mu)
    return ErmProblem(ds, loss, make_penalty(penalty_kind), lam)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
