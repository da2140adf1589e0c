"""Closed-form 2D test surfaces and quadratic objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lossscape.field import build_image_grid

FIELD_NAMES = ("himmelblau", "gaussian_mixture", "constant")


def himmelblau(x, y):
    return (x * x + y - 11.0) ** 2 + (x + y * y - 7.0) ** 2


def gaussian_mixture(x, y, m=5, seed=0, lo=-1.0, hi=1.0):
    """Negative sum of ``m`` seeded Gaussian bumps with centres inside [lo, hi]^2."""
    rng = np.random.default_rng(seed)
    span = hi - lo
    centers = rng.uniform(lo + 0.1 * span, hi - 0.1 * span, size=(m, 2))
    widths = rng.uniform(0.05, 0.15, size=m) * span
    depths = rng.uniform(0.5, 1.5, size=m)
    out = np.zeros(np.broadcast(x, y).shape)
    for (cx, cy), s, a in zip(centers, widths, depths):
        out -= a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * s * s))
    return out


def grid_axes(resolution, range_):
    rows, cols = (resolution, resolution) if np.isscalar(resolution) else resolution
    if rows < 2 or cols < 2:
        raise ValueError("resolution must be at least 2 per axis")
    lo, hi = range_
    return np.linspace(lo, hi, int(rows)), np.linspace(lo, hi, int(cols))


def analytic_values(name, resolution, range_, **params):
    a1, a2 = grid_axes(resolution, range_)
    X, Y = np.meshgrid(a1, a2, indexing="ij")
    if name == "himmelblau":
        Z = himmelblau(X, Y)
    elif name == "gaussian_mixture":
        Z = gaussian_mixture(X, Y, m=int(params.get("m", 5)), seed=int(params.get("seed", 0)),
                             lo=range_[0], hi=range_[1])
    elif name == "constant":
        Z = np.full(X.shape, float(params.get("c", 0.0)))
    else:
        raise ValueError(f"unknown analytic field {name!r}; choose from {FIELD_NAMES}")
    return a1, a2, Z


def analytic_field(name, resolution=201, range_=(-6.0, 6.0), **params):
    """Evaluate a named surface directly on an image grid."""
    a1, a2, Z = analytic_values(name, resolution, range_, **params)
    return build_image_grid(Z, a1, a2)


@dataclass(frozen=True, eq=False)
class Quadratic:
    """L(theta) = 0.5 (theta - center)^T A (theta - center) + offset."""

    A: np.ndarray
    center: np.ndarray | None = None
    offset: float = 0.0
    scale: float = 1.0

    def _d(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        return theta if self.center is None else theta - self.center

    @property
    def dim(self):
        return self.A.shape[0]

    def loss(self, theta):
        d = self._d(theta)
        return float(self.scale * 0.5 * d @ (self.A @ d) + self.offset)

    def grad(self, theta):
        return self.scale * (self.A @ self._d(theta))
