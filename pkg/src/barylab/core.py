"""Domain types and elementary measure operations.

Every array held by these types is float64 and marked read-only, so
instances can be shared freely between solvers and simulated agents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError

SIMPLEX_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


def _values(x) -> np.ndarray:
    """Unwrap a domain type (or pass through an array-like) to an ndarray."""
    for attr in ("values", "entries", "w"):
        if hasattr(x, attr) and not isinstance(x, np.ndarray):
            return getattr(x, attr)
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class Histogram:
    """A point of the probability simplex.

    Use :meth:`strict` to reject inputs whose mass is off by more than
    ``1e-12`` and :meth:`normalize` to rescale raw (non-negative) data.
    """

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1 or v.size == 0:
            raise DimensionMismatch(f"histogram must be a non-empty vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("histogram has non-finite entries")
        if v.min() < 0:
            raise DomainError(f"histogram has a negative entry ({v.min():.3g})")
        if abs(v.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"histogram mass is {v.sum():.17g}, expected 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def strict(cls, values) -> "Histogram":
        return cls(values)

    @classmethod
    def normalize(cls, values) -> "Histogram":
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise DimensionMismatch(f"histogram must be a non-empty vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0:
            raise DomainError("histogram data must be finite and non-negative")
        s = v.sum()
        if s <= 0:
            raise DomainError("histogram data has zero mass")
        return cls(v / s)

    @classmethod
    def uniform(cls, n: int) -> "Histogram":
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class CostMatrix:
    """Symmetric non-negative ground cost."""

    entries: np.ndarray
    max_abs: float = field(init=False)

    def __post_init__(self):
        c = _frozen(self.entries)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DimensionMismatch(f"cost matrix must be square, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise DomainError("cost matrix has non-finite entries")
        if c.min() < 0:
            raise DomainError("cost matrix has a negative entry")
        if not np.array_equal(c, c.T):
            raise DomainError("cost matrix is not symmetric")
        object.__setattr__(self, "entries", c)
        object.__setattr__(self, "max_abs", float(np.abs(c).max()))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class TransportPlan:
    entries: np.ndarray

    def __post_init__(self):
        p = _frozen(self.entries)
        if p.ndim != 2:
            raise DimensionMismatch(f"transport plan must be a matrix, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DomainError("transport plan has non-finite entries")
        if p.min() < 0:
            raise DomainError("transport plan has a negative entry")
        if p.sum() <= 0:
            raise DomainError("transport plan has zero total mass")
        object.__setattr__(self, "entries", p)

    @property
    def row_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class Weights:
    w: np.ndarray

    def __post_init__(self):
        w = _frozen(self.w)
        if w.ndim != 1 or w.size == 0:
            raise DimensionMismatch("weights must be a non-empty vector")
        if not np.all(w > 0):
            raise DomainError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"weights sum to {w.sum():.17g}, expected 1")
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, m: int) -> "Weights":
        return cls(np.full(m, 1.0 / m))

    @property
    def m(self) -> int:
        return self.w.size

    def __array__(self, dtype=None, copy=None):
        return self.w if dtype is None else self.w.astype(dtype)


class BarycenterProblem:
    """m histograms on a common n-point support, each with its own cost.

    Parameters
    ----------
    measures : sequence of Histogram or array-like, shape (m, n)
    costs : CostMatrix, array (n, n) shared by all measures, or sequence of m costs
    weights : Weights or array-like, optional
        Uniform weights when omitted.

    The validated data are exposed as stacked read-only arrays:
    ``P`` (m, n), ``C`` (m, n, n) and ``w`` (m,).
    """

    def __init__(self, measures: Sequence, costs, weights=None):
        hists = [m if isinstance(m, Histogram) else Histogram(m) for m in measures]
        if len(hists) < 2:
            raise DomainError("a barycenter problem needs at least two measures")
        n = hists[0].n
        if any(h.n != n for h in hists):
            raise DimensionMismatch("all measures must share the same support size")
        m = len(hists)

        if isinstance(costs, CostMatrix) or np.ndim(_values(costs)) == 2:
            c = costs if isinstance(costs, CostMatrix) else CostMatrix(costs)
            cost_list = [c] * m
        else:
            cost_list = [c if isinstance(c, CostMatrix) else CostMatrix(c) for c in costs]
        if len(cost_list) != m:
            raise DimensionMismatch(f"{len(cost_list)} costs for {m} measures")
        if any(c.n != n for c in cost_list):
            raise DimensionMismatch("cost matrices must be n x n with n the support size")

        if weights is None:
            wts = Weights.uniform(m)
        else:
            wts = weights if isinstance(weights, Weights) else Weights(weights)
        if wts.m != m:
            raise DimensionMismatch(f"{wts.m} weights for {m} measures")

        self.measures = tuple(hists)
        self.costs = tuple(cost_list)
        self.weights = wts
        self.P = _frozen(np.stack([h.values for h in hists]))
        self.C = _frozen(np.stack([c.entries for c in cost_list]))
        self.w = wts.w
        self.cost_norms = _frozen([c.max_abs for c in cost_list])
        self.c_max = float(self.cost_norms.max())

    @property
    def m(self) -> int:
        return self.P.shape[0]

    @property
    def n(self) -> int:
        return self.P.shape[1]

    def with_measures(self, measures) -> "BarycenterProblem":
        return BarycenterProblem(measures, self.costs, self.weights)

    def with_costs(self, costs) -> "BarycenterProblem":
        return BarycenterProblem(self.measures, costs, self.weights)

    def __repr__(self):
        return f"BarycenterProblem(m={self.m}, n={self.n}, c_max={self.c_max:.4g})"


def _xlogx_minus_x(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * (np.log(x[pos]) - 1.0)
    return out


def entropy(plan) -> float:
    """Negative entropy ``sum(pi * (log(pi) - 1))`` with ``0 log 0 = 0``."""
    p = _values(plan)
    if np.any(p < 0):
        raise DomainError("entropy needs a non-negative plan")
    return float(_xlogx_minus_x(p).sum())


def kl_divergence(plan, ref) -> float:
    """Generalized KL divergence between non-negative matrices.

    ``KL(pi | theta) = <pi, log pi - log theta> + <theta - pi, 1>``; zero
    entries of ``pi`` contribute only ``theta_ij``.
    """
    p = _values(plan)
    q = _values(ref)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes {p.shape} and {q.shape} differ")
    if np.any(p < 0) or np.any(q < 0):
        raise DomainError("KL divergence needs non-negative arguments")
    pos = p > 0
    if np.any(q[pos] <= 0):
        raise DomainError("reference vanishes where the plan has mass")
    val = np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos]))) + q.sum() - p.sum()
    return float(max(val, 0.0))


def transport_cost(plan, cost) -> float:
    p = _values(plan)
    c = _values(cost)
    if p.shape != c.shape:
        raise DimensionMismatch(f"plan shape {p.shape} does not match cost shape {c.shape}")
    return float(np.sum(p * c))
