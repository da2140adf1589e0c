"""Scalar fields on graphs: the sampled landscape as vertices, values and edges.

Two connectivity builders are provided, the image-style 8-neighbourhood and an
exact k-nearest-neighbour graph, plus a CSV reader/writer whose edges are
re-derived from a sidecar JSON that records which builder to use.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from pathlib import Path

import numpy as np

from lossscape._io import atomic_write_text, dump_json, fmt_float

__all__ = [
    "FieldError",
    "FieldFormatError",
    "ScalarField",
    "build_image_grid",
    "build_knn_graph",
    "knn_indices",
    "image_grid_edges",
    "save_field",
    "load_field",
    "meta_path_for",
]

CSV_HEADER = ("alpha1", "alpha2", "loss")


class FieldError(ValueError):
    """Invalid input to a field builder."""


class FieldFormatError(FieldError):
    """A field file could not be parsed."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Vertex-weighted undirected graph.

    ``edges`` holds each undirected edge once as ``(a, b)`` with ``a < b``,
    sorted lexicographically. ``builder``/``rows``/``cols``/``k`` record how
    the connectivity was made so that it can be rebuilt after a reload.
    """

    values: np.ndarray
    coords: np.ndarray
    edges: np.ndarray
    builder: str | None = None
    rows: int | None = None
    cols: int | None = None
    k: int | None = None
    _checked: bool = dc_field(default=False, repr=False)

    def __post_init__(self):
        values = _frozen(self.values, np.float64).reshape(-1)
        coords = _frozen(self.coords, np.float64).reshape(-1, 2)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        n = values.shape[0]
        if coords.shape[0] != n:
            raise FieldError(f"coords has {coords.shape[0]} rows for {n} vertices")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise FieldError(f"non-finite value at vertex {int(bad[0])}")
        if not self._checked:
            edges = _canonical_edges(edges, n)
        edges = _frozen(edges, np.int64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "edges", edges)

    @property
    def n_vertices(self):
        return self.values.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @cached_property
    def _csr(self):
        n = self.n_vertices
        a, b = self.edges[:, 0], self.edges[:, 1]
        src = np.concatenate([a, b])
        dst = np.concatenate([b, a])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return indptr, dst

    def neighbors(self, v):
        indptr, indices = self._csr
        return indices[indptr[v]:indptr[v + 1]]

    def degrees(self):
        indptr, _ = self._csr
        return np.diff(indptr)

    def adjacency_lists(self):
        """Neighbour lists as plain Python lists (fast to iterate)."""
        indptr, indices = self._csr
        flat = indices.tolist()
        bounds = indptr.tolist()
        return [flat[bounds[i]:bounds[i + 1]] for i in range(self.n_vertices)]

    def with_values(self, values):
        """Same graph and coordinates, new per-vertex values."""
        return ScalarField(values, self.coords, self.edges, self.builder,
                           self.rows, self.cols, self.k, _checked=True)

    def permuted(self, perm):
        """Relabel vertices: old vertex ``perm[i]`` becomes new vertex ``i``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        return ScalarField(self.values[perm], self.coords[perm], inv[self.edges])

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return (
            np.array_equal(self.values, other.values)
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.edges, other.edges)
            and (self.builder, self.rows, self.cols, self.k)
            == (other.builder, other.rows, other.cols, other.k)
        )

    __hash__ = None

    def meta(self):
        return {"builder": self.builder, "rows": self.rows, "cols": self.cols, "k": self.k}


def _canonical_edges(edges, n):
    if edges.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if edges.min() < 0 or edges.max() >= n:
        raise FieldError("edge endpoint out of range")
    if np.any(edges[:, 0] == edges[:, 1]):
        raise FieldError("self-loop in edge list")
    e = np.sort(edges, axis=1)
    return np.unique(e, axis=0)


def image_grid_edges(rows, cols):
    """Edges of the 8-connected ``rows`` x ``cols`` pixel grid (row-major ids)."""
    idx = np.arange(rows * cols, dtype=np.int64).reshape(rows, cols)
    parts = [
        np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1),    # right
        np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1),    # down
        np.stack([idx[:-1, :-1].ravel(), idx[1:, 1:].ravel()], axis=1),  # down-right
        np.stack([idx[:-1, 1:].ravel(), idx[1:, :-1].ravel()], axis=1),  # down-left
    ]
    e = np.concatenate(parts, axis=0)
    e = np.sort(e, axis=1)
    return e[np.lexsort((e[:, 1], e[:, 0]))]


def build_image_grid(values, alphas1=None, alphas2=None):
    """Field on an R x C pixel grid with 8-connectivity.

    Vertex ``i*C + j`` sits at ``(alphas1[i], alphas2[j])``; without axes the
    integer grid position ``(i, j)`` is used.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise FieldError(f"expected a non-empty 2D matrix, got shape {values.shape}")
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise FieldError(f"non-finite entry at cell ({i}, {j})")
    rows, cols = values.shape
    a1 = np.arange(rows, dtype=np.float64) if alphas1 is None else np.asarray(alphas1, np.float64)
    a2 = np.arange(cols, dtype=np.float64) if alphas2 is None else np.asarray(alphas2, np.float64)
    if a1.shape != (rows,) or a2.shape != (cols,):
        raise FieldError("axis arrays do not match the matrix shape")
    g1, g2 = np.meshgrid(a1, a2, indexing="ij")
    coords = np.stack([g1.ravel(), g2.ravel()], axis=1)
    return ScalarField(values.ravel(), coords, image_grid_edges(rows, cols),
                       builder="grid", rows=rows, cols=cols, _checked=True)


def knn_indices(points, k, chunk=512):
    """Directed exact k-NN lists, shape (n, k).

    Squared Euclidean distances are computed coordinate-wise (no Gram trick)
    so equal distances on lattices compare equal; ties go to the lower index.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    k = int(k)
    if k < 1:
        raise FieldError("k must be positive")
    if k >= n:
        raise FieldError(f"k={k} must be smaller than the number of points ({n})")
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = pts[start:stop]
        d2 = (block[:, None, 0] - pts[None, :, 0]) ** 2 + (block[:, None, 1] - pts[None, :, 1]) ** 2
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")
        out[start:stop] = order[:, :k]
    return out


def build_knn_graph(points, values, k=8):
    """Field whose edges are the union-symmetrized exact k-NN relation."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    if pts.shape[0] != vals.shape[0]:
        raise FieldError("points and values differ in length")
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise FieldError(f"non-finite value at vertex {int(bad[0])}")
    nn = knn_indices(pts, k)
    src = np.repeat(np.arange(pts.shape[0], dtype=np.int64), nn.shape[1])
    edges = np.stack([src, nn.ravel()], axis=1)
    return ScalarField(vals, pts, edges, builder="knn", k=int(k))


def meta_path_for(path):
    """``landscape.csv`` -> ``landscape.meta.json``."""
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def save_field(field, path, extra_meta=None):
    """Write the CSV plus its sidecar metadata JSON; returns both paths."""
    if field.builder not in ("grid", "knn"):
        raise FieldError("only fields made by build_image_grid/build_knn_graph can be saved")
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for (a1, a2), v in zip(field.coords.tolist(), field.values.tolist()):
        buf.write(f"{fmt_float(a1)},{fmt_float(a2)},{fmt_float(v)}\n")
    meta = field.meta()
    if extra_meta:
        meta.update({key: val for key, val in extra_meta.items() if key not in meta})
    path = atomic_write_text(path, buf.getvalue())
    mpath = atomic_write_text(meta_path_for(path), dump_json(meta))
    return path, mpath


def _parse_rows(text):
    reader = csv.reader(io.StringIO(text))
    header = None
    coords, values = [], []
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if header is None:
            header = tuple(c.strip() for c in row)
            if header != CSV_HEADER:
                raise FieldFormatError(f"expected header {','.join(CSV_HEADER)}", lineno)
            continue
        if len(row) != 3:
            raise FieldFormatError(f"expected 3 columns, got {len(row)}", lineno)
        try:
            a1, a2, v = (float(c) for c in row)
        except ValueError as exc:
            raise FieldFormatError(f"malformed number ({exc})", lineno) from None
        if not (np.isfinite(a1) and np.isfinite(a2) and np.isfinite(v)):
            raise FieldFormatError("non-finite value", lineno)
        coords.append((a1, a2))
        values.append(v)
    if not values:
        raise FieldFormatError("no vertices")
    return np.array(coords, dtype=np.float64), np.array(values, dtype=np.float64)


def load_field(path, meta_path=None):
    """Read a field CSV and rebuild its edges from the sidecar metadata."""
    path = Path(path)
    coords, values = _parse_rows(path.read_text())
    meta_path = Path(meta_path) if meta_path is not None else meta_path_for(path)
    meta = json.loads(meta_path.read_text())
    builder = meta.get("builder")
    if builder == "grid":
        rows, cols = int(meta["rows"]), int(meta["cols"])
        if rows * cols != values.size:
            raise FieldFormatError(f"{values.size} rows do not fill a {rows}x{cols} grid")
        a1 = coords[::cols, 0]
        a2 = coords[:cols, 1]
        g1, g2 = np.meshgrid(a1, a2, indexing="ij")
        if not (np.array_equal(g1.ravel(), coords[:, 0]) and np.array_equal(g2.ravel(), coords[:, 1])):
            raise FieldFormatError("coordinates are not a row-major tensor grid")
        return build_image_grid(values.reshape(rows, cols), a1, a2)
    if builder == "knn":
        return build_knn_graph(coords, values, int(meta["k"]))
    raise FieldFormatError(f"unknown builder {builder!r} in {meta_path}")
