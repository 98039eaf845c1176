import numpy as np
import pytest

from barylab.agd import agd_solve, calibrate
from barylab.errors import IterationCapExceeded, LocalityViolation
from barylab.graph import laplacian
from barylab.ibp import ibp_barycenter_params, ibp_solve
from barylab.netsim import BYTES_PER_ENTRY, Network, run_agd_decentralized, run_ibp_centralized
from conftest import random_problem


def path3():
    return Network({0: (1,), 1: (0, 2), 2: (1,)})


def test_locality_enforced():
    net = path3()
    net.store(0, "p", np.ones(2))
    with net.acting_as(1):
        with pytest.raises(LocalityViolation):
            net.local("p", owner=0)
        with pytest.raises(LocalityViolation):
            net.store(1, "x", 1)
    with net.acting_as(0):
        with pytest.raises(LocalityViolation):
            net.send(2, np.zeros(2))
        net.send(1, np.zeros(2))
    with pytest.raises(LocalityViolation):
        net.local("p", owner=0)  # harness code outside an agent step
    with pytest.raises(LocalityViolation):
        net.keep("p", 0)
    net.barrier()
    with net.acting_as(2):
        with pytest.raises(LocalityViolation):
            net.receive(0)
    with net.acting_as(1):
        with pytest.raises(LocalityViolation):
            net.receive(2)  # 2 sent nothing
        assert np.array_equal(net.receive(0), np.zeros(2))


def test_message_counting():
    net = path3()
    with net.acting_as(1):
        net.send(0, np.arange(5.0))
        net.send(2, np.arange(5.0))
    net.barrier()
    assert net.metrics.counters() == {"rounds": 1, "vectors_sent": 2, "bytes_sent": 2 * 5 * BYTES_PER_ENTRY}


def test_messages_are_copies():
    net = path3()
    v = np.ones(3)
    with net.acting_as(0):
        net.send(1, v)
    v[:] = 5
    net.barrier()
    with net.acting_as(1):
        assert np.array_equal(net.receive(0), np.ones(3))


@pytest.mark.parametrize("seed", range(3))
def test_ibp_matches_sequential(seed):
    pr = random_problem(np.random.default_rng(seed), 6, 4)
    gamma, eps_prime = ibp_barycenter_params(pr, 0.1)
    ref = ibp_solve(pr, gamma, eps_prime)
    rep, metrics = run_ibp_centralized(pr, gamma, eps_prime)
    assert rep.iterations == ref.iterations
    assert np.array_equal(rep.state.u, ref.state.u) and np.array_equal(rep.state.v, ref.state.v)
    assert np.array_equal(rep.qbar, ref.qbar)
    k = rep.iterations // 2
    assert metrics.rounds == 2 * k + 1
    assert metrics.vectors_sent == pr.m * (2 * k + 1)
    assert metrics.bytes_sent == metrics.vectors_sent * pr.n * BYTES_PER_ENTRY


def test_ibp_cap(rng):
    pr = random_problem(rng, 6, 4)
    with pytest.raises(IterationCapExceeded):
        run_ibp_centralized(pr, 0.01, 1e-12, max_iter=6)


@pytest.mark.parametrize("topology", ["star", "cycle", "complete", "erdos"])
def test_agd_matches_sequential(topology, rng):
    pr = random_problem(rng, 5, 5)
    lap = laplacian(topology, 5, seed=4)
    q_ref, rep = agd_solve(pr, 0.1, lap, max_iter=60)
    q, metrics = run_agd_decentralized(pr, 0.1, lap, max_iter=60)
    assert np.array_equal(q.values, q_ref.values)
    assert metrics.rounds == 60
    assert metrics.vectors_sent == 60 * 2 * lap.edge_count()


def test_agd_default_runs_calibrated_n(median):
    lap = laplacian("path", 3)
    _, metrics = run_agd_decentralized(median, 0.2, lap)
    assert metrics.rounds == calibrate(median, 0.2, lap).N_bound


def test_private_data_audit(rng):
    pr = random_problem(rng, 4, 4, shared_cost=False)
    reads = []
    record = lambda reader, owner, key: reads.append((reader, owner, key))  # noqa: E731
    run_agd_decentralized(pr, 0.2, laplacian("cycle", 4), max_iter=5, on_access=record)
    gamma, eps_prime = ibp_barycenter_params(pr, 0.2)
    run_ibp_centralized(pr, gamma, eps_prime, on_access=record)
    assert reads
    assert all(reader == owner for reader, owner, _ in reads)
    # the IBP master (node m) never touches measures or kernels
    assert {k for r, _, k in reads if r == pr.m} == {"w"}


def test_counters_deterministic(rng):
    pr = random_problem(rng, 5, 4)
    lap = laplacian("erdos", 4, seed=2)
    a = run_agd_decentralized(pr, 0.2, lap, max_iter=20)[1].counters()
    b = run_agd_decentralized(pr, 0.2, lap, max_iter=20)[1].counters()
    assert a == b
    metrics = run_agd_decentralized(pr, 0.2, lap, max_iter=3)[1]
    assert set(metrics.as_dict()["wall_time"]) == {"compute", "communicate"}
