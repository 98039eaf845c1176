"""Experiment driver: build a problem, run a solver, and write JSON/CSV reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import agd, ibp, netsim
from .core import BarycenterProblem, _values
from .data import ingest
from .entropic import reg_ot_cost
from .errors import BarylabError, DimensionMismatch, DomainError, ParseError
from .graph import GraphLaplacian, consensus_norm, laplacian, read_edge_list
from .oracle import exact_barycenter
from .prox_ibp import ProxConfig, prox_ibp_solve
from .rounding import round_to_feasible

SCHEMA = 1
#: Reference regularization for objective reporting, relative to ||C||_inf.
GAMMA_REF = 1e-3
#: Largest m n^2 for which scaling studies solve the exact barycenter LP.
LP_SIZE_LIMIT = 20_000

INPUT_ERRORS = (ParseError, DimensionMismatch, DomainError, FileNotFoundError, IsADirectoryError)


@dataclass
class ExperimentConfig:
    algo: str = "ibp"
    eps: float = 0.05
    topology: str = "complete"
    data: str = "gauss-mix"
    seed: int = 0
    out: str | None = None
    gamma: float | None = None
    mode: str = "fixed"
    n: int = 8
    m: int = 4
    cost: str | None = None
    outer_iters: int = 30
    inner_iters: int | None = None
    restart: bool = False

    def __post_init__(self):
        if self.algo not in ("ibp", "prox-ibp", "agd"):
            raise DomainError(f"unknown algo {self.algo!r}")
        if not 0 < self.eps < 1:
            raise DomainError("eps must lie in (0, 1)")
        if self.mode not in ("fixed", "adaptive"):
            raise DomainError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")


def build_graph(topology: str, m: int, seed: int = 0) -> GraphLaplacian:
    """``star``, ``cycle``, ``path``, ``complete``, ``erdos[:p]`` or an edge-list file."""
    name, _, arg = topology.partition(":")
    if name in ("star", "cycle", "path", "complete"):
        return laplacian(name, m)
    if name == "erdos":
        return laplacian("erdos", m, p=float(arg) if arg else 0.5, seed=seed)
    if Path(topology).is_file():
        lap = read_edge_list(topology, m)
        return lap
    raise ParseError(f"unknown topology {topology!r}")


def barycenter_objective(
    problem: BarycenterProblem, q, gamma_ref: float = GAMMA_REF, tol: float = 1e-9, max_iter: int = 5000
) -> float:
    """``sum_l w_l W(p_l, q)`` approximated by a near-unregularized Sinkhorn plan.

    Each plan is computed at ``gamma = gamma_ref * ||C_l||_inf`` on the common
    support of ``p_l`` and ``q``, rounded onto ``Pi(p_l, q)`` and priced with
    the plain transport cost. Sinkhorn runs at most ``max_iter`` sweeps; the
    rounding absorbs whatever marginal error is left. The entropic bias is
    at most ``2 gamma ln n`` per measure.
    """
    q = _values(q)
    total = 0.0
    for w, p, c in zip(problem.w, problem.P, problem.C):
        rows, cols = p > 0, q > 0
        sub = c[np.ix_(rows, cols)]
        g = gamma_ref * max(float(np.abs(c).max()), 1e-300)
        pr, qc = p[rows] / p[rows].sum(), q[cols] / q[cols].sum()
        _, plan = reg_ot_cost(pr, qc, sub, g, tol=tol, max_iter=max_iter, raise_on_cap=False)
        full = np.zeros_like(c)
        full[np.ix_(rows, cols)] = plan.entries
        total += w * float(np.sum(round_to_feasible(full, p, q).entries * c))
    return total


def _positive(problem: BarycenterProblem, eps: float) -> tuple[BarycenterProblem, bool]:
    if np.all(problem.P > 0):
        return problem, False
    return problem.with_measures([agd.smooth_marginal(p, eps) for p in problem.P]), True


def solve(cfg: ExperimentConfig, problem: BarycenterProblem) -> dict:
    """Run the configured solver; returns the report body (without objective)."""
    out: dict = {"algo": cfg.algo, "eps": cfg.eps}
    if cfg.algo == "ibp":
        work, smoothed = _positive(problem, cfg.eps)
        gamma, eps_prime = ibp.ibp_barycenter_params(work, cfg.eps)
        if cfg.gamma is not None:
            gamma = cfg.gamma
        rep, metrics = netsim.run_ibp_centralized(work, gamma, eps_prime)
        q = ibp.common_barycenter(rep.state)
        out.update(
            barycenter=q.values,
            iterations=rep.iterations,
            metrics=metrics.as_dict(),
            smoothed=smoothed,
            calibration={
                "gamma": gamma,
                "eps_prime": eps_prime,
                "R_v": rep.rv_bound,
                "iteration_bound": rep.iteration_bound,
            },
            trace={"criterion": rep.criterion_trace},
        )
    elif cfg.algo == "prox-ibp":
        work, smoothed = _positive(problem, cfg.eps)
        gamma = cfg.gamma if cfg.gamma is not None else 0.5 * work.c_max
        if cfg.inner_iters is not None:
            pc = ProxConfig(gamma, cfg.outer_iters, inner_iters=cfg.inner_iters, restart=cfg.restart)
        else:
            pc = ProxConfig.from_accuracy(work, cfg.eps, gamma, cfg.outer_iters, restart=cfg.restart)
        q, tr = prox_ibp_solve(work, pc)
        inner = int(sum(tr.inner_iterations))
        # each inner half-step pair is one gather plus one broadcast; one closing gather per solve
        rounds = inner + len(tr.inner_iterations)
        out.update(
            barycenter=q.values,
            iterations=inner,
            metrics={"rounds": rounds, "vectors_sent": rounds * work.m, "bytes_sent": rounds * work.m * work.n * 8},
            smoothed=smoothed,
            calibration={"gamma": tr.gamma, "outer_iters": pc.outer_iters, "inner_iters": pc.inner_iters,
                         "inner_tol": pc.inner_tol},
            trace={"objective": tr.objectives, "inner_iterations": tr.inner_iterations, "criterion": tr.criteria},
        )
    else:
        lap = build_graph(cfg.topology, problem.m, cfg.seed)
        if cfg.mode == "fixed":
            cons = []
            q, metrics = netsim.run_agd_decentralized(
                problem, cfg.eps, lap, observer=lambda k, qb: cons.append(consensus_norm(lap, qb))
            )
            cal = agd.calibrate(problem, cfg.eps, lap)
            iters, metrics = cal.N_bound, metrics.as_dict()
            trace = {"consensus": cons}
        else:
            q, rep = agd.agd_solve(problem, cfg.eps, lap, "adaptive")
            cal, iters = rep.calibration, rep.iterations
            vec = 2 * lap.edge_count() * iters
            metrics = {"rounds": iters, "vectors_sent": vec, "bytes_sent": vec * problem.n * 8}
            trace = {"consensus": rep.consensus_trace}
        out.update(
            barycenter=q.values,
            iterations=iters,
            metrics=metrics,
            calibration={**cal.as_dict(), "chi": lap.chi, "lambda_max": lap.lambda_max,
                         "lambda_min_plus": lap.lambda_min_plus, "topology": cfg.topology},
            trace=trace,
        )
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_trace_csv(path, trace: dict) -> None:
    keys = list(trace)
    length = max((len(trace[k]) for k in keys), default=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", *keys])
        for i in range(length):
            writer.writerow([i + 1, *(trace[k][i] if i < len(trace[k]) else "" for k in keys)])


def run_experiment(cfg: ExperimentConfig) -> tuple[dict, int]:
    """Run one configured experiment.

    Returns the report and an exit code (0 success, 1 solver error, 2 input
    error). With ``cfg.out`` set the report is written as JSON there and the
    convergence trace as CSV next to it (``<out stem>.trace.csv``). Errors
    are recorded in the report rather than raised.
    """
    report: dict = {"schema": SCHEMA, "config": asdict(cfg)}
    code = 0
    try:
        problem = ingest(cfg.data, n=cfg.n, m=cfg.m, seed=cfg.seed, cost=cfg.cost)
        report["problem"] = {"m": problem.m, "n": problem.n, "c_max": problem.c_max}
        body = solve(cfg, problem)
        body["objective"] = barycenter_objective(problem, body["barycenter"])
        body["objective_bias_bound"] = 2 * GAMMA_REF * problem.c_max * math.log(problem.n)
        report.update(body)
    except INPUT_ERRORS as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = 2
    except (BarylabError, ArithmeticError, RuntimeError) as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = 1
    report["status"] = "ok" if code == 0 else "error"

    trace = report.pop("trace", {})
    if cfg.out:
        out = Path(cfg.out)
        if trace:
            tpath = out.with_name(out.stem + ".trace.csv")
            write_trace_csv(tpath, trace)
            report["trace_csv"] = str(tpath)
        out.write_text(json.dumps(_jsonable(report), indent=2), encoding="utf-8")
    report["trace"] = trace
    return _jsonable(report), code


def known_optimum(problem: BarycenterProblem) -> float:
    """Exact barycenter value: closed form for the two-point swap cost, LP when small, else NaN."""
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    if problem.n == 2 and all(np.array_equal(c, swap) for c in problem.C):
        # W(p, q) = |p_1 - q_1|: the optimum sits at a weighted median of the p_l[0]
        a = problem.P[:, 0]
        return float(min(problem.w @ np.abs(a - t) for t in a))
    if problem.m * problem.n**2 <= LP_SIZE_LIMIT:
        return exact_barycenter(problem)[0]
    return math.nan


def scaling_study(
    algo: str,
    eps_list,
    problem: BarycenterProblem,
    *,
    lap: GraphLaplacian | None = None,
    mode: str = "adaptive",
    optimum: float | None = None,
    out=None,
) -> tuple[list[dict], float]:
    """Iterations against accuracy for one solver.

    Returns rows with columns ``eps, iterations, rounds, objective_gap`` and
    the least-squares slope of ``log(iterations)`` against ``log(1/eps)``.
    IBP iterations are half-steps; its rounds are one per half-step plus the
    closing gather. AGD does one round per iteration.
    """
    eps_list = [float(e) for e in eps_list]
    if len(set(eps_list)) < 4:
        raise DomainError("need at least 4 distinct eps values")
    if optimum is None:
        optimum = known_optimum(problem)
    rows = []
    for eps in eps_list:
        if algo == "ibp":
            work, _ = _positive(problem, eps)
            q, rep = ibp.barycenter_ibp(work, eps)
            iters, rounds = rep.iterations, rep.iterations + 1
        elif algo == "agd":
            if lap is None:
                raise DomainError("AGD scaling needs a graph")
            agd_mode = "adaptive" if mode == "adaptive" else "fixed_N"
            q, rep = agd.agd_solve(problem, eps, lap, agd_mode, record_trace=False)
            iters = rounds = rep.iterations
        else:
            raise DomainError(f"scaling study supports ibp and agd, not {algo!r}")
        gap = barycenter_objective(problem, q) - optimum if math.isfinite(optimum) else math.nan
        rows.append({"eps": eps, "iterations": iters, "rounds": rounds, "objective_gap": gap})
    x = np.log(1.0 / np.array(eps_list))
    y = np.log([r["iterations"] for r in rows])
    slope = float(np.polyfit(x, y, 1)[0])
    if out is not None:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["eps", "iterations", "rounds", "objective_gap"])
            writer.writeheader()
            writer.writerows(rows)
    return rows, slope
