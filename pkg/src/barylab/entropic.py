"""Entropic optimal transport primitives in the log domain.

Kernels ``K = exp(-C / gamma)`` are stored as ``log K`` and every
kernel-vector product goes through a log-sum-exp, so gammas of order
``1e-3 * ||C||`` are safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import TransportPlan, _frozen, _values
from .errors import DomainError, NonConvergence, NumericalError

LOG_OVERFLOW = 700.0


def logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    """Stable ``log(sum(exp(a), axis))``; slices of all ``-inf`` give ``-inf``."""
    mx = np.max(a, axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - mx), axis=axis, keepdims=True)) + mx
    return np.squeeze(out, axis=axis)


def log_kt_exp(log_k: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``log(K^T exp(u))`` for kernels of shape (..., n, n) and u of shape (..., n)."""
    return logsumexp(u[..., :, None] + log_k, axis=-2)


def log_k_exp(log_k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``log(K exp(v))``."""
    return logsumexp(log_k + v[..., None, :], axis=-1)


@dataclass(frozen=True)
class GibbsKernel:
    """Log-domain kernel ``log_K`` together with its regularization strength.

    Built from a cost with :meth:`from_cost`; proximal kernels carry extra
    ``log(plan)`` terms and are built by :func:`barylab.prox_ibp.prox_kernel`.
    """

    log_K: np.ndarray
    gamma: float

    def __post_init__(self):
        lk = _frozen(self.log_K)
        if lk.ndim != 2 or lk.shape[0] != lk.shape[1]:
            raise DomainError(f"kernel must be square, got shape {lk.shape}")
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if np.any(np.isnan(lk)) or np.any(lk > 1e-9):
            raise DomainError("log-kernel entries must be <= 0")
        object.__setattr__(self, "log_K", lk)
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def from_cost(cls, cost, gamma: float) -> "GibbsKernel":
        if not gamma > 0:
            raise DomainError("gamma must be positive")
        return cls(-_values(cost) / gamma, gamma)

    @property
    def n(self) -> int:
        return self.log_K.shape[0]


@dataclass(frozen=True)
class DualPotentials:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u, v = _frozen(self.u), _frozen(self.v)
        if u.shape != v.shape or u.ndim != 1:
            raise DomainError("potentials must be two vectors of equal length")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DomainError("potentials must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, n: int) -> "DualPotentials":
        return cls(np.zeros(n), np.zeros(n))


def log_plan(u, log_k, v) -> np.ndarray:
    return np.asarray(u)[..., :, None] + log_k + np.asarray(v)[..., None, :]


def make_plan(pot: DualPotentials, ker: GibbsKernel) -> TransportPlan:
    """``diag(e^u) K diag(e^v)`` evaluated entrywise from the log domain."""
    lp = log_plan(pot.u, ker.log_K, pot.v)
    if lp.max() > LOG_OVERFLOW:
        raise NumericalError(f"log plan entry {lp.max():.1f} exceeds {LOG_OVERFLOW}")
    return TransportPlan(np.exp(lp))


def reg_ot_cost(
    p, q, cost, gamma: float, tol: float = 1e-9, max_iter: int | None = None, raise_on_cap: bool = True
):
    """Entropy-regularized OT cost by log-domain Sinkhorn.

    Parameters
    ----------
    p, q : array-like, shape (n,)
        Strictly positive marginals (row and column).
    cost : CostMatrix or ndarray, shape (n, n)
    gamma : float
        Regularization strength.
    tol : float
        Stop once ``||pi 1 - p||_1 + ||pi^T 1 - q||_1 <= tol``.
    max_iter : int, optional
        Defaults to ``10 * ceil((||C||_inf / gamma) / tol)`` (at least 100).
    raise_on_cap : bool
        When False, hitting ``max_iter`` returns the current plan instead of
        raising; callers that round the plan afterwards can use this.

    Returns
    -------
    value : float
        ``<C, pi> + gamma * H(pi)`` at the returned plan.
    plan : TransportPlan
    """
    p = _values(p)
    q = _values(q)
    c = _values(cost)
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    if p.min() <= 0 or q.min() <= 0:
        raise DomainError("reg_ot_cost needs strictly positive marginals")
    if max_iter is None:
        max_iter = max(100, 10 * math.ceil((np.abs(c).max() / gamma) / tol))

    log_k = -c / gamma
    log_p, log_q = np.log(p), np.log(q)
    u = np.zeros_like(p)
    v = np.zeros_like(q)
    err = np.inf
    for it in range(1, max_iter + 1):
        u = log_p - log_k_exp(log_k, v)
        v = log_q - log_kt_exp(log_k, u)
        # columns are exact after the v-update; only rows drift
        row = np.exp(u + log_k_exp(log_k, v))
        err = np.abs(row - p).sum() + np.abs(np.exp(v + log_kt_exp(log_k, u)) - q).sum()
        if err <= tol:
            break
    else:
        if raise_on_cap:
            raise NonConvergence(f"Sinkhorn did not reach tol={tol:g} in {max_iter} iterations (err={err:.3g})")

    plan = np.exp(log_plan(u, log_k, v))
    value = float(np.sum(plan * c) + gamma * np.sum(plan * (log_plan(u, log_k, v) - 1.0)))
    return value, TransportPlan(plan)


def _column_scores(u, cost, gamma):
    u = np.asarray(u, dtype=np.float64)
    c = _values(cost)
    g = np.asarray(gamma, dtype=np.float64)
    if g.ndim:
        g = g[..., None, None]
    return (u[..., :, None] - c) / g


def conjugate_value(u, p, cost, gamma) -> float:
    """Fenchel conjugate of ``q -> W_gamma(p, q)`` up to a fixed constant.

    Returns ``gamma * sum_j p_j * LSE_i((u_i - C_ij) / gamma) + gamma * <p, log p>``.
    The additive ``gamma <p, log p>`` term makes the value vanish at ``u = 0``
    for a zero cost and uniform ``p``; it does not depend on ``u``, so
    gradients and value differences are unaffected. Batched inputs (leading
    axis of size m) return an array of m values.
    """
    p = _values(p)
    g = np.asarray(gamma, dtype=np.float64)
    lse = logsumexp(_column_scores(u, cost, g), axis=-2)
    plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    out = g * (np.sum(p * lse, axis=-1) + np.sum(plogp, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def exact_conjugate_offset(p, gamma):
    """Difference ``W*_exact - conjugate_value`` for the ``H = <pi, log pi - 1>`` convention."""
    p = _values(p)
    plogp = np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0), axis=-1)
    return np.asarray(gamma) * (1.0 - 2.0 * plogp)


def conjugate_grad(u, p, cost, gamma) -> np.ndarray:
    """Gradient of :func:`conjugate_value`: a p-weighted mixture of column softmaxes.

    ``[grad]_i = sum_j p_j exp((u_i - C_ij)/gamma) / sum_r exp((u_r - C_rj)/gamma)``.
    Accepts a leading batch axis on ``u``, ``p``, ``cost`` and ``gamma``.
    """
    p = _values(p)
    s = _column_scores(u, cost, gamma)
    s = s - s.max(axis=-2, keepdims=True)
    e = np.exp(s)
    soft = e / e.sum(axis=-2, keepdims=True)
    return np.einsum("...ij,...j->...i", soft, p)
