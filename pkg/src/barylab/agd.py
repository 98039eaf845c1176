"""Accelerated primal-dual gradient method for barycenters over a graph.

The dual variable lives in the coordinates ``y_l = [sqrt(W) u]_l / w_l``
that each agent feeds to its own conjugate gradient, so an iteration only
needs ``Wbar`` block products (one exchange with graph neighbours) and never
``sqrt(W)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BarycenterProblem, Histogram
from .entropic import conjugate_grad, conjugate_value, exact_conjugate_offset
from .errors import CapExceeded, DomainError
from .graph import GraphLaplacian, apply_block, consensus_norm
from .rounding import round_to_feasible


def smooth_marginal(p, eps: float) -> Histogram:
    """Pull ``p`` towards uniform: ``(1 - eps/8) (p + eps / (n (8 - eps)))``.

    The result has every entry at least ``eps / (8n)`` and lies within
    ``eps / 4`` of ``p`` in l1.
    """
    if not 0 < eps < 8:
        raise DomainError("smoothing needs 0 < eps < 8")
    p = np.asarray(getattr(p, "values", p), dtype=np.float64)
    n = p.size
    return Histogram.normalize((1.0 - eps / 8.0) * (p + eps / (n * (8.0 - eps))))


def alpha_step(A: float, L: float) -> tuple[float, float]:
    """Largest root of ``A + alpha = 2 L alpha^2``; returns ``(alpha, A + alpha)``."""
    if A < 0 or not L > 0:
        raise DomainError("alpha_step needs A >= 0 and L > 0")
    alpha = (1.0 + math.sqrt(1.0 + 8.0 * L * A)) / (4.0 * L)
    return alpha, A + alpha


def dual_radius(
    problem: BarycenterProblem,
    lap: GraphLaplacian,
    gamma: float | None = None,
    eps: float | None = None,
    include_second_term: bool = True,
) -> float:
    """Bound R on the optimal dual solution.

    ``R^2 = 2n sum_l w_l^2 ||C_l||^2 / lambda_min^+``; when ``gamma`` and
    ``eps`` are given and ``include_second_term`` is set, the
    ``2n gamma^2 ln^2(8n/eps)`` term is added to the numerator.
    """
    n = problem.n
    num = 2.0 * n * float(np.sum(problem.w**2 * problem.cost_norms**2))
    if include_second_term and gamma is not None and eps is not None:
        num += 2.0 * n * gamma**2 * math.log(8.0 * n / eps) ** 2
    return math.sqrt(num / lap.lambda_min_plus)


@dataclass(frozen=True)
class AgdCalibration:
    eps: float
    gamma: float
    gamma_l: np.ndarray
    L: float
    R: float
    N_bound: int

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "gamma": self.gamma,
            "gamma_l": self.gamma_l.tolist(),
            "L": self.L,
            "R": self.R,
            "N_bound": self.N_bound,
        }


def calibrate(
    problem: BarycenterProblem, eps: float, lap: GraphLaplacian, include_second_term: bool = True
) -> AgdCalibration:
    """Parameters for accuracy ``eps``: per-agent ``gamma_l = eps / (4 m w_l ln n)``,
    ``L = lambda_max / gamma``, the dual radius R and the iteration count
    ``N = (1/eps) sqrt(64 chi m n ln n sum_l w_l^2 ||C_l||^2)``.
    """
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if lap.m != problem.m:
        raise DomainError(f"graph has {lap.m} agents but the problem has {problem.m} measures")
    m, n = problem.m, problem.n
    ln_n = math.log(n)
    gamma = eps / (4.0 * m * ln_n)
    gamma_l = gamma / problem.w
    L = lap.lambda_max / gamma
    R = dual_radius(problem, lap, gamma, eps, include_second_term)
    s = float(np.sum(problem.w**2 * problem.cost_norms**2))
    N = math.ceil(math.sqrt(64.0 * lap.chi * m * n * ln_n * s) / eps)
    return AgdCalibration(eps, gamma, gamma_l, L, R, max(N, 1))


@dataclass(frozen=True)
class AgdState:
    """Dual sequences (eta, zeta, lambda), running primal average and step weight.

    All block arrays have shape (m, n). ``plan_avg`` (m, n, n) is the running
    average of the primal plans, kept only when a duality gap is needed.
    """

    eta: np.ndarray
    zeta: np.ndarray
    lam: np.ndarray
    q_avg: np.ndarray
    A: float = 0.0
    k: int = 0
    plan_avg: np.ndarray | None = None

    @classmethod
    def initial(cls, m: int, n: int, track_plans: bool = False) -> "AgdState":
        z = np.zeros((m, n))
        return cls(z, z.copy(), z.copy(), z.copy(), 0.0, 0, np.zeros((m, n, n)) if track_plans else None)


def _softmax_plans(lam, P, C, gamma_l):
    """Primal plans behind the conjugate gradients, rows indexed by the p-side."""
    s = (lam[:, :, None] - C) / gamma_l[:, None, None]
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    soft = e / e.sum(axis=1, keepdims=True)
    # soft[l, i, j]: q-index i, p-index j; transpose so rows carry p
    return np.swapaxes(soft * P[:, None, :], 1, 2)


def agd_iterate(
    state: AgdState,
    cal: AgdCalibration,
    problem: BarycenterProblem,
    lap: GraphLaplacian,
    P_smooth: np.ndarray | None = None,
) -> AgdState:
    """One accelerated step for every agent.

    ``P_smooth`` holds the smoothed measures; defaults to ``problem.P``.
    """
    P = problem.P if P_smooth is None else P_smooth
    w = problem.w
    alpha, A_next = alpha_step(state.A, cal.L)
    A = state.A
    lam = (alpha * state.zeta + A * state.eta) / A_next
    g = conjugate_grad(lam, P, problem.C, cal.gamma_l)
    zeta = state.zeta - (alpha / w)[:, None] * apply_block(lap, g)
    eta = (alpha * zeta + A * state.eta) / A_next
    q_avg = (alpha * g + A * state.q_avg) / A_next
    plan_avg = state.plan_avg
    if plan_avg is not None:
        plan_avg = (alpha * _softmax_plans(lam, P, problem.C, cal.gamma_l) + A * plan_avg) / A_next
    return AgdState(eta, zeta, lam, q_avg, A_next, state.k + 1, plan_avg)


def dual_value(u, problem: BarycenterProblem, lap: GraphLaplacian, gamma_l, P=None) -> float:
    """Dual objective ``sum_l w_l W*_l([sqrt(W) u]_l / w_l)`` in the original u-coordinates.

    Uses :func:`conjugate_value`'s additive-constant convention.
    """
    P = problem.P if P is None else P
    y = (lap.sqrt @ np.asarray(u)) / problem.w[:, None]
    return float(problem.w @ conjugate_value(y, P, problem.C, gamma_l))


def dual_grad(u, problem: BarycenterProblem, lap: GraphLaplacian, gamma_l, P=None) -> np.ndarray:
    """Gradient of :func:`dual_value`: ``sqrt(W)`` applied to the stacked agent gradients."""
    P = problem.P if P is None else P
    y = (lap.sqrt @ np.asarray(u)) / problem.w[:, None]
    return lap.sqrt @ conjugate_grad(y, P, problem.C, gamma_l)


def duality_gap(state: AgdState, cal: AgdCalibration, problem: BarycenterProblem, P: np.ndarray) -> float:
    """Upper bound on the duality gap at the current iterates.

    Dual side: exact conjugates at ``eta``. Primal side: the averaged plans
    rounded onto ``Pi(p_l, q)`` for the common ``q = sum_l w_l q_avg_l``,
    which over-estimates the regularized primal value at ``q``.
    """
    w, C = problem.w, problem.C
    dual = float(w @ (conjugate_value(state.eta, P, C, cal.gamma_l) + exact_conjugate_offset(P, cal.gamma_l)))
    q = w @ state.q_avg
    q = q / q.sum()
    primal = 0.0
    for l in range(problem.m):
        pl = round_to_feasible(state.plan_avg[l], P[l], q).entries
        pos = pl > 0
        ent = float(np.sum(pl[pos] * (np.log(pl[pos]) - 1.0)))
        primal += w[l] * (float(np.sum(pl * C[l])) + cal.gamma_l[l] * ent)
    return primal + dual


@dataclass
class AgdReport:
    barycenter: Histogram
    q_blocks: np.ndarray
    iterations: int
    calibration: AgdCalibration
    mode: str
    consensus: float
    consensus_target: float
    gap: float | None = None
    consensus_trace: list = field(default_factory=list)
    gap_trace: list = field(default_factory=list)
    state: AgdState | None = None


def agd_solve(
    problem: BarycenterProblem,
    eps: float,
    lap: GraphLaplacian,
    mode: str = "fixed_N",
    *,
    include_second_term: bool = True,
    max_iter: int | None = None,
    record_trace: bool = True,
) -> tuple[Histogram, AgdReport]:
    """Approximate the barycenter to accuracy ``eps`` over the graph ``lap``.

    Parameters
    ----------
    mode : {"fixed_N", "adaptive"}
        ``fixed_N`` runs exactly the calibrated N iterations. ``adaptive``
        stops once the consensus norm of the primal average is at most
        ``eps / (2R)`` and the duality gap bound is at most ``eps / 2``,
        with N (or ``max_iter``) as a cap; hitting the cap raises CapExceeded.

    Returns
    -------
    barycenter : Histogram
        ``sum_l w_l q_l`` over the agents' averaged primal blocks.
    report : AgdReport
    """
    if mode not in ("fixed_N", "adaptive"):
        raise DomainError(f"unknown mode {mode!r}")
    cal = calibrate(problem, eps, lap, include_second_term)
    P = np.stack([smooth_marginal(p, eps).values for p in problem.P])
    adaptive = mode == "adaptive"
    cap = cal.N_bound if max_iter is None else max_iter
    target = eps / (2.0 * cal.R)

    state = AgdState.initial(problem.m, problem.n, track_plans=adaptive)
    cons_trace, gap_trace = [], []
    gap = None
    last_check = 0
    while state.k < cap:
        state = agd_iterate(state, cal, problem, lap, P)
        cons = consensus_norm(lap, state.q_avg)
        if record_trace:
            cons_trace.append(cons)
        if adaptive and cons <= target and state.k - last_check >= max(1, state.k // 50):
            last_check = state.k
            gap = duality_gap(state, cal, problem, P)
            gap_trace.append((state.k, gap))
            if gap <= eps / 2.0:
                break
    else:
        if adaptive:
            cons = consensus_norm(lap, state.q_avg)
            raise CapExceeded(
                f"adaptive AGD hit the cap of {cap} iterations (gap={gap}, consensus={cons:.3g}, target={target:.3g})",
                gap=gap,
                consensus=cons,
            )

    q = Histogram.normalize(problem.w @ state.q_avg)
    report = AgdReport(
        barycenter=q,
        q_blocks=state.q_avg.copy(),
        iterations=state.k,
        calibration=cal,
        mode=mode,
        consensus=consensus_norm(lap, state.q_avg),
        consensus_target=target,
        gap=gap,
        consensus_trace=cons_trace,
        gap_trace=gap_trace,
        state=state,
    )
    return q, report
