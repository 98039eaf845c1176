"""Communication-graph Laplacians and the implicit block operator ``W = Wbar (x) I_n``."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, DisconnectedGraph, DomainError, ParseError

ERDOS_RETRIES = 100


@dataclass(frozen=True)
class Spectrum:
    lambda_max: float
    lambda_min_plus: float
    chi: float
    eigenvalues: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class GraphLaplacian:
    """Laplacian ``deg(i)`` on the diagonal, ``-1`` per edge.

    Construct through :func:`laplacian` or :meth:`from_edges`; construction
    validates symmetry, zero row sums and connectivity.
    """

    entries: np.ndarray
    edges: tuple = ()

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise DimensionMismatch(f"Laplacian must be square with m >= 2, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise DomainError("Laplacian must be symmetric")
        if np.abs(a.sum(axis=1)).max() > 1e-12:
            raise DomainError("Laplacian rows must sum to zero")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        sp = self.spectrum
        if sp.eigenvalues[0] < -1e-10:
            raise DomainError("Laplacian is not positive semidefinite")
        if np.sum(sp.eigenvalues <= 1e-8 * sp.lambda_max) != 1:
            raise DisconnectedGraph("graph is disconnected (zero eigenvalue has multiplicity > 1)")

    @classmethod
    def from_edges(cls, m: int, edges) -> "GraphLaplacian":
        a = np.zeros((m, m))
        seen = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < m and 0 <= j < m):
                raise DomainError(f"edge ({i}, {j}) out of range for m={m}")
            if i == j:
                raise DomainError(f"self-loop at node {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                continue
            seen.add(key)
            a[i, j] = a[j, i] = -1.0
            a[i, i] += 1.0
            a[j, j] += 1.0
        return cls(a, tuple(sorted(seen)))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.entries))

    @cached_property
    def spectrum(self) -> Spectrum:
        ev = np.linalg.eigvalsh(self.entries)
        lmax = float(ev[-1])
        positive = ev[ev > 1e-8 * lmax]
        lmin = float(positive[0]) if positive.size else 0.0
        chi = lmax / lmin if lmin > 0 else np.inf
        ev.setflags(write=False)
        return Spectrum(lmax, lmin, chi, ev)

    @property
    def lambda_max(self) -> float:
        return self.spectrum.lambda_max

    @property
    def lambda_min_plus(self) -> float:
        return self.spectrum.lambda_min_plus

    @property
    def chi(self) -> float:
        return self.spectrum.chi

    def neighbors(self, i: int) -> tuple[int, ...]:
        row = self.entries[i]
        return tuple(int(j) for j in np.flatnonzero(row) if j != i)

    @cached_property
    def _sparse_rows(self):
        return [(np.flatnonzero(r), r[np.flatnonzero(r)]) for r in self.entries]

    @cached_property
    def sqrt(self) -> np.ndarray:
        """Dense ``sqrt(Wbar)``; analysis helper only, the solvers never need it."""
        ev, vec = np.linalg.eigh(self.entries)
        return (vec * np.sqrt(np.clip(ev, 0.0, None))) @ vec.T

    def edge_count(self) -> int:
        return (self.nnz - self.m) // 2


def laplacian(topology: str, m: int, *, p: float = 0.5, seed: int = 0, edges=None) -> GraphLaplacian:
    """Build the Laplacian of a named topology on m agents.

    ``topology`` is one of ``star`` (hub is the last node), ``cycle``,
    ``complete``, ``path``, ``erdos`` (edge probability ``p``; the seed is
    incremented until the sample is connected) or ``custom`` (``edges``).
    """
    if m < 2:
        raise DomainError("need m >= 2 agents")
    if topology == "star":
        e = [(i, m - 1) for i in range(m - 1)]
    elif topology == "path":
        e = [(i, i + 1) for i in range(m - 1)]
    elif topology == "cycle":
        e = [(i, (i + 1) % m) for i in range(m)] if m > 2 else [(0, 1)]
    elif topology == "complete":
        e = [(i, j) for i in range(m) for j in range(i + 1, m)]
    elif topology == "erdos":
        for attempt in range(ERDOS_RETRIES):
            rng = np.random.default_rng(seed + attempt)
            mask = np.triu(rng.random((m, m)) < p, k=1)
            e = list(zip(*np.nonzero(mask)))
            try:
                return GraphLaplacian.from_edges(m, e)
            except DisconnectedGraph:
                continue
        raise DisconnectedGraph(f"no connected G({m}, {p}) sample in {ERDOS_RETRIES} seeds")
    elif topology == "custom":
        if edges is None:
            raise DomainError("custom topology needs an edge list")
        e = edges
    else:
        raise DomainError(f"unknown topology {topology!r}")
    return GraphLaplacian.from_edges(m, e)


def read_edge_list(path, m: int | None = None) -> GraphLaplacian:
    """Parse ``i j`` pairs (0-indexed, one per line; ``#`` starts a comment)."""
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected two node ids, got {line!r}", line=lineno)
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ParseError(f"non-integer node id in {line!r}", line=lineno) from None
    if not edges:
        raise ParseError("edge list is empty")
    size = m if m is not None else 1 + max(max(e) for e in edges)
    return GraphLaplacian.from_edges(size, edges)


def apply_block(lap: GraphLaplacian, vecs) -> np.ndarray:
    """``[W x]_l = sum_j Wbar_lj x_j`` for x given as m stacked n-vectors.

    Touches only the nonzeros of ``Wbar``: O(n * nnz).
    """
    x = np.asarray(vecs, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != lap.m:
        raise DimensionMismatch(f"expected {lap.m} blocks, got array of shape {x.shape}")
    out = np.empty_like(x)
    for l, (idx, vals) in enumerate(lap._sparse_rows):
        out[l] = vals @ x[idx]
    return out


def consensus_norm(lap: GraphLaplacian, vecs) -> float:
    """``||sqrt(W) x||_2`` computed as ``sqrt(<x, W x>)``."""
    x = np.asarray(vecs, dtype=np.float64)
    val = float(np.sum(x * apply_block(lap, x)))
    return float(np.sqrt(max(val, 0.0)))
