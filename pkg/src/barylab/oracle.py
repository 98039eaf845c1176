"""Exact linear-programming values for small instances (via scipy's HiGHS)."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .core import BarycenterProblem, _values
from .errors import NonConvergence


def _marginal_rows(n: int):
    eye = sparse.identity(n, format="csr")
    ones = sparse.csr_matrix(np.ones((1, n)))
    # vec(pi) row-major: row sums = (I kron 1^T), column sums = (1^T kron I)
    return sparse.kron(eye, ones), sparse.kron(ones, eye)


def exact_ot(p, q, cost) -> float:
    """Unregularized OT value ``min <C, pi>`` over ``Pi(p, q)``."""
    p, q, c = _values(p), _values(q), _values(cost)
    n, k = c.shape
    rows = sparse.kron(sparse.identity(n), sparse.csr_matrix(np.ones((1, k))))
    cols = sparse.kron(sparse.csr_matrix(np.ones((1, n))), sparse.identity(k))
    res = linprog(
        c.ravel(),
        A_eq=sparse.vstack([rows, cols]).tocsr(),
        b_eq=np.concatenate([p, q]),
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise NonConvergence(f"OT linear program failed: {res.message}")
    return float(res.fun)


def exact_barycenter(problem: BarycenterProblem) -> tuple[float, np.ndarray]:
    """Optimal value and a minimizer of ``sum_l w_l W(p_l, q)`` over the simplex."""
    m, n = problem.m, problem.n
    rows, cols = _marginal_rows(n)
    nn = n * n
    blocks = []
    b = []
    for l in range(m):
        left = sparse.csr_matrix((n, l * nn))
        right = sparse.csr_matrix((n, (m - 1 - l) * nn))
        blocks.append(sparse.hstack([left, rows, right, sparse.csr_matrix((n, n))]))
        b.append(problem.P[l])
        blocks.append(sparse.hstack([left, cols, right, -sparse.identity(n)]))
        b.append(np.zeros(n))
    c = np.concatenate([problem.w[l] * problem.C[l].ravel() for l in range(m)] + [np.zeros(n)])
    res = linprog(
        c, A_eq=sparse.vstack(blocks).tocsr(), b_eq=np.concatenate(b), bounds=(0, None), method="highs"
    )
    if res.status != 0:
        raise NonConvergence(f"barycenter linear program failed: {res.message}")
    return float(res.fun), res.x[-n:]


def barycenter_objective_exact(problem: BarycenterProblem, q) -> float:
    """``sum_l w_l W(p_l, q)`` by one OT linear program per measure."""
    q = _values(q)
    return float(sum(w * exact_ot(p, q, c) for w, p, c in zip(problem.w, problem.P, problem.C)))
