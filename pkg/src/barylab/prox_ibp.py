"""KL-proximal outer loop around dual IBP.

Each outer step solves ``min sum_l w_l {<C_l, pi_l> + gamma KL(pi_l | pi_l^k)}``
over plans with marginals ``p_l`` and a shared second marginal. That is an
entropic barycenter problem with kernel ``pi^k * exp(-C/gamma)``, so IBP
solves it, and the outer loop converges to the unregularized barycenter even
for large ``gamma``.

Plans are never formed explicitly: the accumulated log-kernel
``log pi^k - C/gamma`` is carried from one outer step to the next.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BarycenterProblem, Histogram, _values
from .entropic import GibbsKernel, log_plan
from .errors import DomainError
from .ibp import IbpState, run_dual_ibp

#: Half-step cap for each inner solve in tolerance mode.
DEFAULT_INNER_CAP = 200_000
#: Inner-iteration growth between consecutive halvings that stops the probe.
BLOWUP_RATIO = 4.0


@dataclass(frozen=True)
class ProxConfig:
    """Settings of the proximal loop.

    Give either ``inner_iters`` (fixed number of v/u pairs per outer step)
    or ``inner_tol`` (stop each inner solve once the marginal-consensus
    criterion is below it, with ``inner_cap`` half-steps at most).
    """

    gamma: float
    outer_iters: int
    inner_iters: int | None = None
    inner_tol: float | None = None
    inner_cap: int = DEFAULT_INNER_CAP
    restart: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if self.outer_iters < 1:
            raise DomainError("outer_iters must be >= 1")
        if self.inner_iters is None and self.inner_tol is None:
            raise DomainError("set inner_iters or inner_tol")
        if self.inner_iters is not None and self.inner_iters < 1:
            raise DomainError("inner_iters must be >= 1")
        if self.inner_tol is not None and not self.inner_tol > 0:
            raise DomainError("inner_tol must be positive")

    @classmethod
    def from_accuracy(
        cls, problem: BarycenterProblem, eps: float, gamma: float, outer_iters: int, tol_const: float = 1.0, **kw
    ) -> "ProxConfig":
        """Tolerance mode with ``inner_tol = tol_const * eps^2 / (m n^3)``."""
        tol = tol_const * eps**2 / (problem.m * problem.n**3)
        return cls(gamma=gamma, outer_iters=outer_iters, inner_tol=tol, **kw)


def prox_log_kernel(log_plan_, cost, gamma: float) -> np.ndarray:
    """``log pi - C / gamma``; works on stacked (m, n, n) inputs."""
    return np.asarray(log_plan_, dtype=np.float64) - _values(cost) / gamma


def prox_kernel(plan, cost, gamma: float) -> GibbsKernel:
    """Kernel ``pi * exp(-C / gamma)`` of the proximal subproblem, kept in log form."""
    pi = _values(plan)
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    if pi.min() <= 0:
        raise DomainError("proximal kernel needs a strictly positive plan")
    return GibbsKernel(prox_log_kernel(np.log(pi), cost, gamma), gamma)


def _kl_logs(log_a, log_b) -> np.ndarray:
    """Generalized KL per measure from log-domain plans of shape (m, n, n)."""
    a, b = np.exp(log_a), np.exp(log_b)
    return np.sum(a * (log_a - log_b) - a + b, axis=(1, 2))


@dataclass
class ProxTrace:
    """Per-outer-step records.

    ``objectives[k]`` is ``sum_l w_l <C_l, pi_l^{k+1}>``; ``prox_objectives``
    adds ``gamma * sum_l w_l KL(pi^{k+1} | pi^k)``.
    """

    gamma: float
    objectives: list = field(default_factory=list)
    prox_objectives: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    criteria: list = field(default_factory=list)
    probe: list = field(default_factory=list)


def _inner(problem, log_K, u, cfg_tol, cfg_iters, cap):
    state = IbpState.initial(problem, 1.0, log_K=log_K, u=u)
    return run_dual_ibp(
        state,
        cfg_tol,
        max_half_steps=cap if cfg_iters is None else 2 * cfg_iters,
        fixed_pairs=cfg_iters,
        raise_on_cap=False,
    )


def prox_ibp_solve(problem: BarycenterProblem, cfg: ProxConfig) -> tuple[Histogram, ProxTrace]:
    """Run ``cfg.outer_iters`` proximal steps.

    The first plan is ``exp(-C/gamma)``, so the first inner problem uses
    kernel ``exp(-2C/gamma)``. Each inner solve starts from the previous
    step's final u-potentials. With ``cfg.restart`` the strength is first
    chosen by :func:`gamma_restart_probe` starting from ``cfg.gamma``.

    Returns
    -------
    q : Histogram
        Weighted mean of the column marginals after the last inner iteration.
    trace : ProxTrace
    """
    gamma = cfg.gamma
    trace_probe = []
    if cfg.restart:
        tol = cfg.inner_tol if cfg.inner_tol is not None else 1e-6
        gamma, trace_probe = gamma_restart_probe(
            problem, tol, gamma0=cfg.gamma, inner_cap=cfg.inner_cap, return_trace=True
        )
    trace = ProxTrace(gamma=gamma, probe=trace_probe)

    C, w = problem.C, problem.w
    log_pi = -C / gamma
    u = np.zeros(problem.P.shape)
    report = None
    for _ in range(cfg.outer_iters):
        log_K = prox_log_kernel(log_pi, C, gamma)
        report = _inner(problem, log_K, u, cfg.inner_tol, cfg.inner_iters, cfg.inner_cap)
        st = report.state
        u = st.u
        new_log_pi = log_plan(st.u, log_K, st.v)
        pi = np.exp(new_log_pi)
        cost = float(w @ np.sum(pi * C, axis=(1, 2)))
        trace.objectives.append(cost)
        trace.prox_objectives.append(cost + gamma * float(w @ _kl_logs(new_log_pi, log_pi)))
        trace.inner_iterations.append(report.iterations)
        trace.criteria.append(report.criterion_value)
        log_pi = new_log_pi

    return Histogram.normalize(report.qbar), trace


def gamma_restart_probe(
    problem: BarycenterProblem,
    eps_tilde: float,
    gamma0: float = 4.0,
    *,
    max_halvings: int = 20,
    inner_cap: int = DEFAULT_INNER_CAP,
    return_trace: bool = False,
):
    """Pick the proximal strength by halving ``gamma0`` until the inner solve blows up.

    For each candidate the first inner problem (kernel ``exp(-2C/gamma)``) is
    solved to criterion ``eps_tilde``. Halving stops as soon as the
    half-step count grows more than fourfold, or the inner cap is hit; the
    previous candidate is returned. With no blow-up in ``max_halvings``
    halvings the answer is ``gamma0``.
    """
    if not eps_tilde > 0:
        raise DomainError("eps_tilde must be positive")
    if not gamma0 > 0:
        raise DomainError("gamma0 must be positive")
    trace = []
    prev = None
    gamma = gamma0
    result = gamma0
    for _ in range(max_halvings + 1):
        rep = _inner(problem, -2.0 * problem.C / gamma, None, eps_tilde, None, inner_cap)
        count = rep.iterations
        trace.append((gamma, count))
        capped = rep.criterion_value > eps_tilde
        if prev is not None and (capped or count > BLOWUP_RATIO * prev):
            result = 2.0 * gamma
            break
        if capped:
            # the very first candidate is already too hard
            result = gamma
            break
        prev = count
        gamma /= 2.0
    return (result, trace) if return_trace else result
