import numpy as np
import pytest

from barylab.core import BarycenterProblem, Histogram
from barylab.entropic import log_plan
from barylab.errors import DomainError
from barylab.ibp import ibp_solve
from barylab.prox_ibp import (
    ProxConfig,
    _inner,
    gamma_restart_probe,
    prox_ibp_solve,
    prox_kernel,
    prox_log_kernel,
)
from conftest import MEDIAN_OPT, SWAP, median_objective, random_problem


def test_prox_kernel_examples():
    pi = np.full((2, 2), 0.25)
    ker = prox_kernel(pi, SWAP, 1.0)
    assert np.allclose(ker.log_K, np.log(0.25) - SWAP)
    assert np.allclose(np.exp(ker.log_K), [[0.25, 0.25 / np.e], [0.25 / np.e, 0.25]])
    with pytest.raises(DomainError):
        prox_kernel(np.array([[0.5, 0.0], [0.0, 0.5]]), SWAP, 1.0)
    with pytest.raises(DomainError):
        prox_kernel(pi, SWAP, 0.0)


def test_stacked_log_kernel(rng):
    pr = random_problem(rng, 4, 3)
    lp = rng.normal(size=(3, 4, 4))
    assert np.allclose(prox_log_kernel(lp, pr.C, 0.3), lp - pr.C / 0.3)


def test_config_validation():
    for kw in ({"gamma": 0, "outer_iters": 1, "inner_iters": 1}, {"gamma": 1, "outer_iters": 0, "inner_iters": 1},
               {"gamma": 1, "outer_iters": 1}, {"gamma": 1, "outer_iters": 1, "inner_tol": -1.0}):
        with pytest.raises(DomainError):
            ProxConfig(**kw)


def test_single_outer_step_is_ibp_at_half_gamma(rng):
    # first kernel is pi0 * exp(-C/gamma) with pi0 = exp(-C/gamma)
    pr = random_problem(rng, 5, 3)
    gamma, tol = 0.4, 1e-6
    q, trace = prox_ibp_solve(pr, ProxConfig(gamma=gamma, outer_iters=1, inner_tol=tol))
    ref = ibp_solve(pr, gamma / 2, tol)
    assert trace.inner_iterations == [ref.iterations]
    assert np.allclose(q.values, ref.qbar / ref.qbar.sum(), atol=1e-12)


def test_median_large_gamma(median):
    q, trace = prox_ibp_solve(median, ProxConfig(gamma=0.5, outer_iters=30, inner_iters=200))
    assert median_objective(q.values) - MEDIAN_OPT <= 0.05
    assert trace.objectives[-1] == pytest.approx(MEDIAN_OPT, abs=1e-6)
    # plain IBP at the same gamma stays visibly blurred
    blurred = ibp_solve(median, 0.5, 1e-9)
    assert trace.objectives[-1] < median_objective(blurred.qbar / blurred.qbar.sum()) + 1e-12


def test_identical_measures_converge_to_the_measure():
    p = Histogram.normalize([0.1, 0.3, 0.6])
    c = (np.arange(3)[:, None] - np.arange(3)[None, :]) ** 2 / 4.0
    pr = BarycenterProblem([p] * 3, c)
    q, _ = prox_ibp_solve(pr, ProxConfig(gamma=0.5, outer_iters=40, inner_tol=1e-10))
    assert np.abs(q.values - p.values).sum() <= 1e-2


@pytest.mark.parametrize("seed", range(5))
def test_transport_cost_non_increasing(seed):
    pr = random_problem(np.random.default_rng(seed), 6, 3)
    _, trace = prox_ibp_solve(pr, ProxConfig(gamma=0.5, outer_iters=8, inner_tol=1e-9))
    assert np.all(np.diff(trace.objectives) <= 1e-6)
    assert all(po >= o - 1e-12 for po, o in zip(trace.prox_objectives, trace.objectives))


def test_warm_start_helps_on_most_steps():
    wins = total = 0
    gamma, tol = 0.5, 1e-8
    for seed in range(10):
        pr = random_problem(np.random.default_rng(seed), 6, 3)
        log_pi, u = -pr.C / gamma, np.zeros(pr.P.shape)
        for k in range(5):
            log_k = prox_log_kernel(log_pi, pr.C, gamma)
            warm = _inner(pr, log_k, u, tol, None, 200_000)
            cold = _inner(pr, log_k, None, tol, None, 200_000)
            if k:
                total += 1
                wins += warm.iterations <= cold.iterations
            log_pi, u = log_plan(warm.state.u, log_k, warm.state.v), warm.state.u
    assert wins >= 0.8 * total


def test_probe_easy_instance_keeps_gamma0():
    p = Histogram.normalize([0.2, 0.3, 0.5])
    pr = BarycenterProblem([p] * 2, 1.0 - np.eye(3))
    gamma, trace = gamma_restart_probe(pr, 1e-6, gamma0=4.0, max_halvings=6, return_trace=True)
    assert gamma == 4.0
    assert len(trace) == 7 and all(c == 2 for _, c in trace)


@pytest.mark.parametrize("seed", range(3))
def test_probe_range_and_trace(seed):
    pr = random_problem(np.random.default_rng(seed), 6, 3)
    gamma, trace = gamma_restart_probe(pr, 1e-6, return_trace=True, inner_cap=5000)
    assert 0 < gamma <= 4.0
    counts = [c for _, c in trace]
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert gamma in [g for g, _ in trace]


def test_probe_scales_with_cost(rng):
    # the inner kernel depends on C / gamma only
    pr = random_problem(rng, 6, 3)
    big = BarycenterProblem(list(pr.P), pr.C[0] * 4.0)
    g1 = gamma_restart_probe(pr, 1e-6, gamma0=1.0, inner_cap=5000)
    g4 = gamma_restart_probe(big, 1e-6, gamma0=4.0, inner_cap=5000)
    assert g4 == pytest.approx(4.0 * g1)


def test_probe_with_restart_flag(median):
    q, trace = prox_ibp_solve(median, ProxConfig(gamma=4.0, outer_iters=5, inner_tol=1e-6, inner_cap=5000, restart=True))
    assert trace.probe and trace.gamma in [g for g, _ in trace.probe]
    assert np.isclose(q.values.sum(), 1.0)
