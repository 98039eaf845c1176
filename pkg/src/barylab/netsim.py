"""Bulk-synchronous message-passing simulator for the barycenter solvers.

Agents compute, then every queued message is delivered at the round barrier.
The harness owns all agent data: an agent may only read its own entries and
messages from its graph neighbours, and any other access raises
:class:`LocalityViolation`. Messages are n-vectors of float64, so each one
accounts for ``8 n`` bytes.
"""

from __future__ import annotations

import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .agd import alpha_step, calibrate, smooth_marginal
from .core import BarycenterProblem, Histogram
from .entropic import conjugate_grad, log_k_exp, log_kt_exp
from .errors import DomainError, IterationCapExceeded, LocalityViolation
from .graph import GraphLaplacian
from .ibp import CAP_SAFETY, IbpReport, IbpState, rv_bound, stopping_criterion

BYTES_PER_ENTRY = 8


@dataclass
class RoundMetrics:
    """Communication counters; ``wall_time`` maps phase name to seconds."""

    rounds: int = 0
    vectors_sent: int = 0
    bytes_sent: int = 0
    wall_time: dict = field(default_factory=lambda: defaultdict(float))

    def counters(self) -> dict:
        """Deterministic part of the metrics (everything but timings)."""
        return {"rounds": self.rounds, "vectors_sent": self.vectors_sent, "bytes_sent": self.bytes_sent}

    def as_dict(self) -> dict:
        return {**self.counters(), "wall_time": dict(self.wall_time)}


@dataclass
class Agent:
    id: int
    neighbors: tuple


class Network:
    """Round-synchronous harness enforcing locality.

    Parameters
    ----------
    neighbors : dict
        ``node -> iterable of neighbour ids`` (symmetric).
    on_access : callable, optional
        ``on_access(reader, owner, key)`` is called on every private-data read;
        tests use it to audit access patterns.
    """

    def __init__(self, neighbors: dict, on_access=None):
        self.agents = {i: Agent(i, tuple(sorted(nb))) for i, nb in neighbors.items()}
        for i, a in self.agents.items():
            for j in a.neighbors:
                if i not in self.agents[j].neighbors:
                    raise DomainError(f"link {i}-{j} is not symmetric")
        self._vault: dict = {}
        self._outbox: dict = {}
        self._inbox: dict = {}
        self.current: int | None = None
        self.on_access = on_access
        self.metrics = RoundMetrics()

    def store(self, owner: int, key: str, value) -> None:
        """Install private data for ``owner`` (setup only, outside any agent step)."""
        if self.current is not None:
            raise LocalityViolation("private data can only be installed by the harness")
        self._vault[(owner, key)] = value

    @contextmanager
    def acting_as(self, i: int):
        prev, self.current = self.current, i
        try:
            yield self.agents[i]
        finally:
            self.current = prev

    def local(self, key: str, owner: int | None = None):
        """Read private data; ``owner`` defaults to the acting agent."""
        reader = self.current
        owner = reader if owner is None else owner
        if self.on_access is not None:
            self.on_access(reader, owner, key)
        if reader is None or owner != reader:
            raise LocalityViolation(f"agent {reader} read {key!r} of agent {owner}")
        return self._vault[(owner, key)]

    def keep(self, key: str, value) -> None:
        """Overwrite the acting agent's own private entry."""
        if self.current is None:
            raise LocalityViolation("keep() called outside an agent step")
        self._vault[(self.current, key)] = value

    def send(self, dst: int, vec) -> None:
        src = self.current
        if src is None or dst not in self.agents[src].neighbors:
            raise LocalityViolation(f"agent {src} cannot send to non-neighbour {dst}")
        vec = np.asarray(vec, dtype=np.float64)
        self._outbox[(src, dst)] = vec.copy()
        self.metrics.vectors_sent += 1
        self.metrics.bytes_sent += vec.size * BYTES_PER_ENTRY

    def receive(self, src: int) -> np.ndarray:
        dst = self.current
        if dst is None or src not in self.agents[dst].neighbors:
            raise LocalityViolation(f"agent {dst} cannot read messages from non-neighbour {src}")
        try:
            return self._inbox[(src, dst)]
        except KeyError:
            raise LocalityViolation(f"no message from {src} to {dst} in this round") from None

    def barrier(self) -> None:
        """Deliver everything sent since the last barrier; counts one round."""
        self._inbox = self._outbox
        self._outbox = {}
        self.metrics.rounds += 1

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.metrics.wall_time[name] += time.perf_counter() - t0


def run_ibp_centralized(
    problem: BarycenterProblem,
    gamma: float,
    eps_prime: float,
    *,
    max_iter: int | None = None,
    on_access=None,
) -> tuple[IbpReport, RoundMetrics]:
    """Dual IBP as a master/worker protocol on a star.

    Each full iteration is two rounds: workers send ``log(K_l^T e^{u_l})``
    to the master, which broadcasts the weighted sum. The master evaluates
    the stopping rule from the gathered vectors, so one closing gather
    follows the last full iteration: ``rounds = 2 k + 1`` for k full
    iterations.
    """
    m = problem.m
    master = m
    nb = {l: (master,) for l in range(m)}
    nb[master] = tuple(range(m))
    net = Network(nb, on_access)
    rv = rv_bound(problem, gamma)
    if max_iter is None:
        max_iter = int(np.ceil(CAP_SAFETY * (4 + 44 * rv / eps_prime)))
    init = IbpState.initial(problem, gamma)
    for l in range(m):
        net.store(l, "log_K", init.log_K[l])
        net.store(l, "log_p", init.log_P[l])
        net.store(l, "u", init.u[l])
    net.store(master, "w", problem.w)

    def gather():
        with net.phase("compute"):
            for l in range(m):
                with net.acting_as(l):
                    a_l = log_kt_exp(net.local("log_K"), net.local("u"))
                    net.keep("a", a_l)
                    net.send(master, a_l)
        with net.phase("communicate"):
            net.barrier()
        with net.acting_as(master):
            return np.stack([net.receive(l) for l in range(m)])

    t = 0
    crit_trace = []
    a = gather()
    while True:
        with net.acting_as(master):
            s = net.local("w") @ a
            for l in range(m):
                net.send(l, s)
        with net.phase("communicate"):
            net.barrier()
        t += 1
        with net.phase("compute"):
            for l in range(m):
                with net.acting_as(l):
                    s_l = net.receive(master)
                    v_l = s_l - net.local("a")
                    u_l = net.local("log_p") - log_k_exp(net.local("log_K"), v_l)
                    net.keep("u", u_l)
                    net.keep("v", v_l)
        t += 1
        a_prev = a
        a = gather()
        with net.acting_as(master):
            w = net.local("w")
            v = (w @ a_prev) - a_prev
            crit, qbar = stopping_criterion(np.exp(v + a), w)
        crit_trace.append(crit)
        if crit <= eps_prime:
            break
        if t >= max_iter:
            raise IterationCapExceeded(f"distributed IBP exceeded {max_iter} half-steps")

    u = np.stack([net._vault[(l, "u")] for l in range(m)])
    v = np.stack([net._vault[(l, "v")] for l in range(m)])
    state = IbpState(u, v, init.log_K, init.log_P, problem.w, t)
    report = IbpReport(
        state=state, qbar=qbar, iterations=t, criterion_value=crit, rv_bound=rv, criterion_trace=crit_trace
    )
    return report, net.metrics


def run_agd_decentralized(
    problem: BarycenterProblem,
    eps: float,
    lap: GraphLaplacian,
    *,
    include_second_term: bool = True,
    max_iter: int | None = None,
    on_access=None,
    observer=None,
) -> tuple[Histogram, RoundMetrics]:
    """Fixed-N accelerated method with one neighbour exchange per iteration.

    Every agent knows only its own measure, cost, weight and its row of the
    Laplacian; the scalars ``L`` and ``N`` are shared configuration.
    ``observer(k, q_blocks)``, if given, sees the stacked primal averages
    after each round; it is outside the protocol and costs no messages.
    """
    cal = calibrate(problem, eps, lap, include_second_term)
    N = cal.N_bound if max_iter is None else max_iter
    m, n = problem.m, problem.n
    nb = {l: lap.neighbors(l) for l in range(m)}
    net = Network(nb, on_access)
    for l, (idx, vals) in enumerate(lap._sparse_rows):
        net.store(l, "p", smooth_marginal(problem.P[l], eps).values)
        net.store(l, "C", problem.C[l])
        net.store(l, "w", problem.w[l])
        net.store(l, "gamma", cal.gamma_l[l])
        net.store(l, "row", (idx, vals))
        for key in ("eta", "zeta", "q_avg"):
            net.store(l, key, np.zeros(n))

    A = 0.0
    for k in range(1, N + 1):
        alpha, A_next = alpha_step(A, cal.L)
        with net.phase("compute"):
            for l in range(m):
                with net.acting_as(l):
                    lam = (alpha * net.local("zeta") + A * net.local("eta")) / A_next
                    g = conjugate_grad(lam, net.local("p"), net.local("C"), net.local("gamma"))
                    net.keep("g", g)
                    for j in nb[l]:
                        net.send(j, g)
        with net.phase("communicate"):
            net.barrier()
        with net.phase("compute"):
            for l in range(m):
                with net.acting_as(l):
                    idx, vals = net.local("row")
                    g = net.local("g")
                    block = np.stack([g if j == l else net.receive(int(j)) for j in idx])
                    wg = vals @ block
                    zeta = net.local("zeta") - (alpha / net.local("w")) * wg
                    eta = (alpha * zeta + A * net.local("eta")) / A_next
                    q_avg = (alpha * g + A * net.local("q_avg")) / A_next
                    net.keep("zeta", zeta)
                    net.keep("eta", eta)
                    net.keep("q_avg", q_avg)
        A = A_next
        if observer is not None:
            observer(k, np.stack([net._vault[(l, "q_avg")] for l in range(m)]))

    q_blocks = np.stack([net._vault[(l, "q_avg")] for l in range(m)])
    return Histogram.normalize(problem.w @ q_blocks), net.metrics
