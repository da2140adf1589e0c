"""Loss evaluation on a regular grid in the plane spanned by two directions.

Cell ``(i, j)`` holds ``loss(theta + alphas1[i] * delta1 + alphas2[j] * delta2)``.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from lossscape.field import build_image_grid, build_knn_graph

__all__ = [
    "LandscapeGrid",
    "SamplingError",
    "axis",
    "thread_count",
    "sample_landscape",
    "grid_from_values",
    "to_field",
    "clip_outliers",
    "nearest_rank",
]

THREADS_ENV = "LOSSSCAPE_THREADS"


class SamplingError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class LandscapeGrid:
    alphas1: np.ndarray
    alphas2: np.ndarray
    losses: np.ndarray
    center_loss: float | None
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.losses.shape


def axis(lo, hi, n):
    """``n`` evenly spaced points on [lo, hi]; exactly antisymmetric when lo == -hi."""
    if n < 2:
        raise ValueError("resolution must be >= 2")
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError(f"invalid range [{lo}, {hi}]")
    a = np.linspace(lo, hi, int(n))
    if lo == -hi:
        a = 0.5 * (a - a[::-1])
    return a


def thread_count():
    """Worker threads for cell evaluation; ``LOSSSCAPE_THREADS=0`` means sequential."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return min(8, os.cpu_count() or 1)
    n = int(raw)
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    return n


def _hash_array(a):
    return hashlib.sha256(np.ascontiguousarray(a, dtype=np.float64).tobytes()).hexdigest()[:16]


def _resolution(resolution):
    if np.isscalar(resolution):
        return int(resolution), int(resolution)
    rows, cols = resolution
    return int(rows), int(cols)


def _ranges(range_):
    r = np.asarray(range_, dtype=np.float64)
    if r.shape == (2,):
        return (float(r[0]), float(r[1])), (float(r[0]), float(r[1]))
    if r.shape == (2, 2):
        return (float(r[0, 0]), float(r[0, 1])), (float(r[1, 0]), float(r[1, 1]))
    raise ValueError("range must be [lo, hi] or [[lo1, hi1], [lo2, hi2]]")


def sample_landscape(loss, theta, dirs, range_=(-1.0, 1.0), resolution=41, threads=None):
    """Evaluate ``loss`` over the 2D grid; non-finite cells are set to the largest finite value."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != dirs.delta1.shape:
        raise ValueError("theta and directions differ in dimension")
    rows, cols = _resolution(resolution)
    r1, r2 = _ranges(range_)
    a1 = axis(*r1, rows)
    a2 = axis(*r2, cols)
    d1, d2 = dirs.delta1, dirs.delta2
    losses = np.empty((rows, cols), dtype=np.float64)

    def row(i):
        base = theta + a1[i] * d1
        for j in range(cols):
            losses[i, j] = loss(base + a2[j] * d2)

    n_threads = thread_count() if threads is None else threads
    if n_threads <= 1:
        for i in range(rows):
            row(i)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(row, range(rows)))

    finite = np.isfinite(losses)
    if not finite.any():
        raise SamplingError("every sampled loss is non-finite")
    n_bad = int((~finite).sum())
    if n_bad:
        losses[~finite] = losses[finite].max()
    center = loss(theta)
    meta = {
        "directions": dict(dirs.provenance),
        "theta_hash": _hash_array(theta),
        "range": [list(r1), list(r2)],
        "resolution": [rows, cols],
        "non_finite_cells": n_bad,
        "non_finite_index": np.argwhere(~finite).tolist() if n_bad else [],
    }
    return LandscapeGrid(a1, a2, losses, float(center), meta)


def grid_from_values(alphas1, alphas2, values, metadata=None):
    """Wrap an already evaluated matrix (e.g. an analytic surface) as a grid."""
    values = np.array(values, dtype=np.float64)
    a1 = np.asarray(alphas1, dtype=np.float64)
    a2 = np.asarray(alphas2, dtype=np.float64)
    return LandscapeGrid(a1, a2, values, None, dict(metadata or {}))


def to_field(grid, representation="image8", k=8):
    """Image (8-neighbour) or k-NN representation of a sampled grid."""
    if representation == "image8":
        return build_image_grid(grid.losses, grid.alphas1, grid.alphas2)
    if representation == "knn":
        g1, g2 = np.meshgrid(grid.alphas1, grid.alphas2, indexing="ij")
        pts = np.stack([g1.ravel(), g2.ravel()], axis=1)
        return build_knn_graph(pts, grid.losses.ravel(), k)
    raise ValueError(f"unknown representation {representation!r}")


def nearest_rank(values, q):
    """Nearest-rank quantile: the ceil(q * n)-th smallest value (1-based)."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    rank = max(1, int(np.ceil(q * v.size - 1e-12)))
    return float(v[rank - 1])


def clip_outliers(grid, q):
    """Replace values above the nearest-rank ``q`` quantile with that quantile."""
    if not (0.5 < q <= 1.0):
        raise ValueError("clip quantile must lie in (0.5, 1]")
    cap = nearest_rank(grid.losses, q)
    over = grid.losses > cap
    losses = np.where(over, cap, grid.losses)
    meta = dict(grid.metadata, clip_quantile=q, clip_value=cap, clipped_cells=int(over.sum()))
    return replace(grid, losses=losses, metadata=meta)
