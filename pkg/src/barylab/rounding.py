"""Projection of approximate transport plans onto exact coupling polytopes."""

from __future__ import annotations

import numpy as np

from .core import Histogram, TransportPlan, _values
from .errors import DegenerateInput, DimensionMismatch

_SKIP = 1e-14


def _shrink(target, current):
    # min(target / current, 1) with empty rows/columns left untouched
    ratio = np.ones_like(current)
    pos = current > 0
    ratio[pos] = np.minimum(target[pos] / current[pos], 1.0)
    return ratio


def round_to_feasible(plan, p, q) -> TransportPlan:
    """Round ``plan`` to a coupling of ``p`` and ``q``.

    Rows exceeding ``p`` are scaled down, then columns exceeding ``q``;
    the missing mass is restored by the rank-one correction
    ``err_r err_c^T / ||err_r||_1``. When the plan has unit mass the
    result moves at most ``2 (sum [B1 - p]^+ + sum [B^T 1 - q]^+)`` in l1.
    """
    b = _values(plan)
    p = _values(p)
    q = _values(q)
    if b.ndim != 2 or b.shape != (p.size, q.size):
        raise DimensionMismatch(f"plan shape {b.shape} does not match marginals ({p.size}, {q.size})")
    if b.sum() <= 0:
        raise DegenerateInput("cannot round a plan with zero mass")

    x = b * _shrink(p, b.sum(axis=1))[:, None]
    y = x * _shrink(q, x.sum(axis=0))[None, :]
    err_r = np.maximum(p - y.sum(axis=1), 0.0)
    err_c = np.maximum(q - y.sum(axis=0), 0.0)
    s_r, s_c = err_r.sum(), err_c.sum()
    if s_r > _SKIP and s_c > 0:
        # equalize masses lost to cancellation so both marginals close exactly
        err_c *= s_r / s_c
        y = y + np.outer(err_r, err_c) / s_r
    return TransportPlan(y)


def common_marginal(plans, w) -> np.ndarray:
    """``q = sum_l w_l B_l^T 1 / sum_l w_l <1, B_l 1>``."""
    arr = np.array([_values(b) for b in plans])
    w = _values(w)
    q = w @ arr.sum(axis=1)
    return q / (w @ arr.sum(axis=(1, 2)))


def round_barycenter_family(plans, measures, weights):
    """Round each plan onto ``Pi(p_l, q)`` for the shared weighted marginal ``q``.

    Returns the rounded plans and ``q`` as a Histogram.
    """
    plans = list(plans)
    measures = [_values(p) for p in measures]
    if len(plans) != len(measures):
        raise DimensionMismatch(f"{len(plans)} plans for {len(measures)} measures")
    q = Histogram.normalize(common_marginal(plans, weights))
    rounded = tuple(round_to_feasible(b, p, q.values) for b, p in zip(plans, measures))
    return rounded, q
