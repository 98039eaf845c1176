import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barylab.entropic import (
    DualPotentials,
    GibbsKernel,
    conjugate_grad,
    conjugate_value,
    exact_conjugate_offset,
    logsumexp,
    make_plan,
    reg_ot_cost,
)
from barylab.errors import DomainError, NonConvergence
from barylab.oracle import exact_ot

from conftest import SWAP, random_cost


@given(st.lists(st.floats(-800, 800), min_size=1, max_size=30))
def test_logsumexp_matches_shifted_direct_sum(xs):
    a = np.array(xs)
    ref = a.max() + np.log(np.sum(np.exp(a - a.max())))
    assert logsumexp(a, axis=0) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_logsumexp_all_neg_inf():
    assert logsumexp(np.array([-np.inf, -np.inf]), axis=0) == -np.inf


def test_make_plan_identity_gauge_and_oracle(rng):
    C = random_cost(rng, 4)
    ker = GibbsKernel.from_cost(C, 0.3)
    assert np.allclose(make_plan(DualPotentials.zeros(4), ker).entries, np.exp(-C / 0.3), rtol=1e-14)
    u, v = rng.normal(size=4), rng.normal(size=4)
    a = make_plan(DualPotentials(u, v), ker).entries
    b = make_plan(DualPotentials(u + 2.5, v - 2.5), ker).entries
    assert np.allclose(a, b, rtol=1e-12)
    dense = np.diag(np.exp(u)) @ np.exp(-C / 0.3) @ np.diag(np.exp(v))
    assert np.allclose(a, dense, rtol=1e-12, atol=0)


def test_kernel_rejects_positive_log_entries():
    with pytest.raises(DomainError):
        GibbsKernel(np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)


def test_reg_ot_identical_marginals_small_cost():
    value, _ = reg_ot_cost([0.5, 0.5], [0.5, 0.5], SWAP, 1e-2)
    assert value <= 0.05


def test_reg_ot_opposite_marginals():
    d = 1e-6
    value, _ = reg_ot_cost([1 - d, d], [d, 1 - d], SWAP, 1e-2)
    assert abs(value - 1) <= 0.05


def test_reg_ot_marginals_within_tol(rng):
    n = 6
    p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
    _, plan = reg_ot_cost(p, q, random_cost(rng, n), 0.05, tol=1e-8)
    pi = plan.entries
    assert np.abs(pi.sum(1) - p).sum() + np.abs(pi.sum(0) - q).sum() <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.sampled_from([0.02, 0.1, 0.5]))
def test_reg_ot_brackets_closed_form_lp(a, b, gamma):
    # with H = <pi, log pi - 1> the entropic term lies in [-(2 ln n + 1), -1] for unit mass
    value, _ = reg_ot_cost([a, 1 - a], [b, 1 - b], SWAP, gamma)
    lp = abs(a - b)
    assert lp - gamma * (2 * np.log(2) + 1) - 1e-7 <= value <= lp - gamma + 1e-7


def test_reg_ot_against_lp(rng):
    n = 5
    p, q, C = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n)), random_cost(rng, n)
    value, plan = reg_ot_cost(p, q, C, 1e-3)
    cost = float(np.sum(plan.entries * C))
    assert abs(cost - exact_ot(p, q, C)) <= 2e-3 * np.log(n) * 2 + 1e-6


def test_reg_ot_cap():
    with pytest.raises(NonConvergence):
        reg_ot_cost([0.3, 0.7], [0.6, 0.4], SWAP, 1e-3, tol=1e-14, max_iter=3)
    value, plan = reg_ot_cost([0.3, 0.7], [0.6, 0.4], SWAP, 1e-3, tol=1e-14, max_iter=3, raise_on_cap=False)
    assert np.isfinite(value)


def test_conjugate_value_zero_at_uniform():
    assert conjugate_value(np.zeros(4), np.full(4, 0.25), np.zeros((4, 4)), 0.7) == pytest.approx(0, abs=1e-15)


def test_conjugate_grad_closed_forms(rng):
    n = 5
    p = rng.dirichlet(np.ones(n))
    assert np.allclose(conjugate_grad(np.zeros(n), p, np.zeros((n, n)), 0.3), 1 / n)
    C = random_cost(rng, n)
    gamma = 0.1
    u = np.zeros(n)
    u[0] = 50 * gamma * np.abs(C).max()
    g = conjugate_grad(u, p, C, gamma)
    s = np.exp((u[:, None] - C) / gamma)
    direct = (s / s.sum(0)) @ p
    assert g[0] >= 1 - 1e-6
    assert np.allclose(g, direct, rtol=1e-12)


@pytest.mark.parametrize("n", [3, 5, 10])
def test_conjugate_grad_matches_finite_differences(n):
    r = np.random.default_rng(n)
    worst = 0.0
    for _ in range(20):
        p, C = r.dirichlet(np.ones(n)), random_cost(r, n)
        gamma = r.uniform(0.05, 1.0)
        u = r.normal(scale=0.5, size=n)
        g = conjugate_grad(u, p, C, gamma)
        h = 1e-6
        fd = np.array(
            [
                (conjugate_value(u + h * e, p, C, gamma) - conjugate_value(u - h * e, p, C, gamma)) / (2 * h)
                for e in np.eye(n)
            ]
        )
        worst = max(worst, np.linalg.norm(fd - g) / np.linalg.norm(g))
    assert worst <= 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_conjugate_grad_on_simplex_convex_and_smooth(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(2, 9))
    p, C, gamma = r.dirichlet(np.ones(n)), random_cost(r, n), r.uniform(0.01, 2)
    u1, u2 = r.normal(size=n), r.normal(size=n)
    g1, g2 = conjugate_grad(u1, p, C, gamma), conjugate_grad(u2, p, C, gamma)
    assert g1.min() >= 0 and abs(g1.sum() - 1) <= 1e-12
    mid = conjugate_value((u1 + u2) / 2, p, C, gamma)
    assert mid <= (conjugate_value(u1, p, C, gamma) + conjugate_value(u2, p, C, gamma)) / 2 + 1e-12
    assert np.linalg.norm(g1 - g2) <= np.linalg.norm(u1 - u2) / gamma + 1e-12


def test_exact_conjugate_is_max_of_linear_minus_reg_cost(rng):
    # W*(u) = max_q <u, q> - W_gamma(p, q); attained at q = grad
    n, gamma = 4, 0.2
    p, C = rng.dirichlet(np.ones(n)), random_cost(rng, n)
    u = rng.normal(size=n)
    exact = conjugate_value(u, p, C, gamma) + exact_conjugate_offset(p, gamma)
    q_star = conjugate_grad(u, p, C, gamma)
    w_star, _ = reg_ot_cost(q_star, p, C, gamma, tol=1e-12)
    assert exact == pytest.approx(u @ q_star - w_star, abs=1e-9)
    for _ in range(20):
        q = rng.dirichlet(np.ones(n))
        w_q, _ = reg_ot_cost(q, p, C, gamma, tol=1e-12)
        assert u @ q - w_q <= exact + 1e-9


def test_logsumexp_matches_scipy(rng):
    from scipy.special import logsumexp as sp_lse

    a = rng.normal(scale=300.0, size=(3, 7, 5))
    for axis in (0, 1, 2, -1):
        assert np.allclose(logsumexp(a, axis=axis), sp_lse(a, axis=axis), rtol=1e-13, atol=1e-12)
