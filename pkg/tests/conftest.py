import numpy as np
import pytest

from barylab.core import BarycenterProblem
from barylab.data import median_instance

MEDIAN_OPT = 0.7 / 3
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def random_cost(rng, n, dim=2):
    """Squared distances of random points, scaled to max 1."""
    x = rng.random((n, dim))
    c = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    return c / c.max()


def random_problem(rng, n, m, shared_cost=True, alpha=1.0):
    P = rng.dirichlet(np.full(n, alpha), size=m)
    P = np.maximum(P, 1e-6)
    P /= P.sum(axis=1, keepdims=True)
    costs = random_cost(rng, n) if shared_cost else [random_cost(rng, n) for _ in range(m)]
    return BarycenterProblem(list(P), costs)


def median_objective(q):
    """Closed form of sum_l w_l W(p_l, q) for the two-point swap cost."""
    q = np.asarray(q)
    return float(np.mean(np.abs(np.array([0.2, 0.5, 0.9]) - q[0])))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def median():
    return median_instance()
