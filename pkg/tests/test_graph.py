import numpy as np
import pytest

from barylab.errors import DimensionMismatch, DisconnectedGraph, DomainError, ParseError
from barylab.graph import GraphLaplacian, apply_block, consensus_norm, laplacian, read_edge_list

TOPOLOGIES = ["star", "cycle", "complete", "path", "erdos"]


def test_star_three():
    lap = laplacian("star", 3)
    assert np.array_equal(lap.entries, [[1, 0, -1], [0, 1, -1], [-1, -1, 2]])
    assert np.allclose(lap.spectrum.eigenvalues, [0, 1, 3], atol=1e-12)
    assert (lap.lambda_max, lap.lambda_min_plus) == pytest.approx((3, 1))
    assert lap.chi == pytest.approx(3)


@pytest.mark.parametrize("m", [2, 3, 5, 9])
def test_complete_spectrum(m):
    lap = laplacian("complete", m)
    assert lap.lambda_max == pytest.approx(m) and lap.lambda_min_plus == pytest.approx(m)
    assert lap.chi == pytest.approx(1)


def test_path_two():
    lap = laplacian("path", 2)
    assert np.array_equal(lap.entries, [[1, -1], [-1, 1]])
    assert np.allclose(lap.spectrum.eigenvalues, [0, 2], atol=1e-12)


@pytest.mark.parametrize("topology", TOPOLOGIES)
@pytest.mark.parametrize("m", [2, 4, 7, 16])
def test_laplacian_invariants(topology, m):
    lap = laplacian(topology, m, seed=3)
    assert np.abs(lap.entries.sum(1)).max() <= 1e-12
    ev = lap.spectrum.eigenvalues
    assert abs(ev[0]) <= 1e-10
    assert np.sum(ev <= 1e-8 * ev[-1]) == 1


def test_chi_trend():
    chis = [laplacian("cycle", m).chi for m in (4, 8, 16, 32)]
    assert all(b > a for a, b in zip(chis, chis[1:]))
    # superlinear: the ratio grows faster than m itself
    assert chis[-1] / chis[0] > 32 / 4
    assert all(laplacian("complete", m).chi == pytest.approx(1) for m in (4, 8, 16, 32))


def test_disconnected_rejected():
    with pytest.raises(DisconnectedGraph):
        GraphLaplacian.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(DomainError):
        GraphLaplacian.from_edges(3, [(0, 0), (1, 2)])
    with pytest.raises(DomainError):
        laplacian("hypercube", 4)


def test_erdos_deterministic():
    a, b = laplacian("erdos", 10, p=0.3, seed=7), laplacian("erdos", 10, p=0.3, seed=7)
    assert np.array_equal(a.entries, b.entries)


def test_apply_block_examples(rng):
    lap = laplacian("path", 2)
    a, b = rng.normal(size=3), rng.normal(size=3)
    out = apply_block(lap, np.stack([a, b]))
    assert np.allclose(out, [a - b, b - a])
    equal = np.tile(rng.normal(size=4), (5, 1))
    assert np.allclose(apply_block(laplacian("cycle", 5), equal), 0, atol=1e-14)
    with pytest.raises(DimensionMismatch):
        apply_block(lap, np.zeros((3, 2)))


@pytest.mark.parametrize("topology", TOPOLOGIES)
def test_apply_block_matches_kronecker(topology, rng):
    m, n = 7, 5
    lap = laplacian(topology, m, seed=1)
    x = rng.normal(size=(m, n))
    dense = np.kron(lap.entries, np.eye(n)) @ x.ravel()
    assert np.allclose(apply_block(lap, x).ravel(), dense, atol=1e-12)


def test_consensus_norm_two_path(rng):
    # q^T W q = ||a - b||^2 for W = [[1, -1], [-1, 1]] (x) I
    a, b = rng.normal(size=4), rng.normal(size=4)
    assert consensus_norm(laplacian("path", 2), np.stack([a, b])) == pytest.approx(np.linalg.norm(a - b))


@pytest.mark.parametrize("topology", TOPOLOGIES)
def test_consensus_norm_matches_dense_sqrt(topology, rng):
    for m in (2, 4, 6):
        lap = laplacian(topology, m, seed=2)
        x = rng.normal(size=(m, 6))
        dense = np.linalg.norm(np.kron(lap.sqrt, np.eye(6)) @ x.ravel())
        assert abs(consensus_norm(lap, x) - dense) <= 1e-10
        shifted = x + rng.normal(size=6)
        assert consensus_norm(lap, shifted) == pytest.approx(consensus_norm(lap, x), abs=1e-10)
        assert consensus_norm(lap, np.tile(x[0], (m, 1))) <= 1e-7


def test_edge_list(tmp_path):
    f = tmp_path / "g.txt"
    f.write_text("# ring\n0 1\n1 2\n2 3 # closing soon\n3 0\n")
    lap = read_edge_list(f)
    assert np.array_equal(lap.entries, laplacian("cycle", 4).entries)
    assert lap.neighbors(0) == (1, 3) and lap.edge_count() == 4
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1 x\n")
    with pytest.raises(ParseError) as err:
        read_edge_list(bad)
    assert err.value.line == 2
