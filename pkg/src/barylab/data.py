"""Histogram sources: CSV files, synthetic Gaussian mixtures and PGM images."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import BarycenterProblem, Histogram
from .errors import DimensionMismatch, DomainError, ParseError


def grid_cost_1d(n: int) -> np.ndarray:
    """Squared distances between ``n`` equispaced points of [0, 1]."""
    if n < 2:
        raise DomainError("a grid needs at least two points")
    x = np.linspace(0.0, 1.0, n)
    return (x[:, None] - x[None, :]) ** 2


def grid_cost_2d(side: int) -> np.ndarray:
    """Squared Euclidean distances on a ``side x side`` grid of [0, 1]^2, row-major."""
    if side < 2:
        raise DomainError("a grid needs at least two points per side")
    x = np.linspace(0.0, 1.0, side)
    pts = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sum(diff**2, axis=-1)


def _read_matrix(path) -> list[tuple[int, list[float]]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
                continue
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"not a number: {cell.strip()!r}", line=lineno, column=col) from None
            if rows and len(vals) != len(rows[0][1]):
                raise ParseError(f"expected {len(rows[0][1])} values, got {len(vals)}", line=lineno)
            rows.append((lineno, vals))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def read_histogram_csv(path) -> list[Histogram]:
    """One histogram per row; rows are normalized, negative or all-zero rows rejected."""
    out = []
    for lineno, vals in _read_matrix(path):
        v = np.asarray(vals)
        if not np.all(np.isfinite(v)) or v.min() < 0:
            raise ParseError("histogram entries must be finite and non-negative", line=lineno)
        if v.sum() <= 0:
            raise ParseError("histogram row has zero mass", line=lineno)
        out.append(Histogram.normalize(v))
    return out


def read_cost_csv(path) -> np.ndarray:
    rows = [vals for _, vals in _read_matrix(path)]
    c = np.asarray(rows)
    if c.shape[0] != c.shape[1]:
        raise DimensionMismatch(f"cost matrix must be square, got {c.shape}")
    return c


def write_histogram_csv(path, hists) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for h in hists:
            writer.writerow([repr(float(x)) for x in np.asarray(h)])


def gauss_mix(n: int, m: int, seed: int = 0, max_components: int = 3) -> list[Histogram]:
    """Discretized Gaussian mixtures on ``n`` equispaced points of [0, 1].

    Each histogram mixes 1 to ``max_components`` bumps with random centres,
    widths in [0.05, 0.2] and weights; the same seed gives the same output.
    """
    if n < 2 or m < 1:
        raise DomainError("gauss-mix needs n >= 2 and m >= 1")
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, n)
    out = []
    for _ in range(m):
        k = rng.integers(1, max_components + 1)
        mu = rng.uniform(0.1, 0.9, size=k)
        sd = rng.uniform(0.05, 0.2, size=k)
        a = rng.dirichlet(np.ones(k))
        dens = np.sum(a[:, None] * np.exp(-0.5 * ((x[None, :] - mu[:, None]) / sd[:, None]) ** 2), axis=0)
        out.append(Histogram.normalize(dens + 1e-12))
    return out


def _pgm_tokens(data: bytes):
    # header tokens, skipping comments; returns tokens and offset after the last one
    tokens, i = [], 0
    while len(tokens) < 4:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ParseError("truncated PGM header")
        tokens.append(data[start:i].decode("ascii", "replace"))
    return tokens, i + 1


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) or ASCII (P2) grayscale PGM into a 2-D float array."""
    data = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(data)
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ParseError(f"{path}: bad PGM header {tokens!r}") from None
    if magic == "P5":
        dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
        if len(data) - offset < width * height * dtype.itemsize:
            raise ParseError(f"{path}: expected {width * height} pixels, file is truncated")
        img = np.frombuffer(data, dtype=dtype, count=width * height, offset=offset)
    elif magic == "P2":
        try:
            img = np.array(data[offset:].split()[: width * height], dtype=float)
        except ValueError:
            raise ParseError(f"{path}: non-numeric pixel data") from None
    else:
        raise ParseError(f"{path}: unsupported PGM magic {magic!r}", line=1)
    if img.size != width * height:
        raise ParseError(f"{path}: expected {width * height} pixels, found {img.size}")
    return img.reshape(height, width).astype(np.float64)


def ingest_pgm(paths) -> tuple[list[Histogram], np.ndarray]:
    """Square PGM images of equal size as histograms with a 2-D grid cost."""
    imgs = [read_pgm(p) for p in paths]
    shape = imgs[0].shape
    if shape[0] != shape[1]:
        raise DimensionMismatch(f"images must be square, got {shape}")
    if any(im.shape != shape for im in imgs):
        raise DimensionMismatch("all images must have the same size")
    hists = [Histogram.normalize(im.ravel()) for im in imgs]
    return hists, grid_cost_2d(shape[0])


def median_instance() -> BarycenterProblem:
    """Two-point instance whose barycenter is a weighted median (optimum 0.7/3)."""
    return BarycenterProblem(
        [np.array([0.2, 0.8]), np.array([0.5, 0.5]), np.array([0.9, 0.1])],
        np.array([[0.0, 1.0], [1.0, 0.0]]),
    )


def ingest(source: str, *, n: int = 8, m: int = 4, seed: int = 0, cost=None) -> BarycenterProblem:
    """Build a problem from a data-source string.

    ``gauss-mix`` (with ``n``, ``m``, ``seed``), ``median``, a ``.csv`` file
    of histograms (1-D grid cost unless ``cost`` names a cost CSV), or one or
    more ``.pgm`` files separated by commas.
    """
    if source == "gauss-mix":
        hists, c = gauss_mix(n, m, seed), grid_cost_1d(n)
    elif source == "median":
        return median_instance()
    elif source.lower().endswith(".pgm"):
        hists, c = ingest_pgm(source.split(","))
    elif source.lower().endswith(".csv"):
        hists = read_histogram_csv(source)
        c = None
    else:
        raise ParseError(f"unknown data source {source!r}")
    if cost is not None:
        c = read_cost_csv(cost)
    elif c is None:
        c = grid_cost_1d(hists[0].n)
    if c.shape[0] != hists[0].n:
        raise DimensionMismatch(f"cost is {c.shape[0]}x{c.shape[0]} but histograms have {hists[0].n} bins")
    return BarycenterProblem(hists, c)
