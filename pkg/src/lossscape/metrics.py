"""Scalar summaries of a landscape's topology and of the Hessian at theta."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from lossscape.directions import hvp, top2_eigenvectors

__all__ = [
    "TopoMetrics",
    "HessianSummary",
    "Esd",
    "topo_metrics",
    "top_eigenvalues",
    "rademacher",
    "hessian_trace",
    "lanczos",
    "hessian_esd",
]


@dataclass(frozen=True)
class TopoMetrics:
    n_saddles: int
    n_minima: int
    avg_persistence: float
    avg_persistence_finite_only: float
    include_essential: bool = True

    def to_json(self):
        return {
            "n_saddles": self.n_saddles,
            "n_minima": self.n_minima,
            "avg_persistence": self.avg_persistence,
            "avg_persistence_finite_only": self.avg_persistence_finite_only,
        }


def topo_metrics(tree, diagram, include_essential=True):
    """Saddle and minimum counts plus mean (death - birth) over the diagram.

    ``avg_persistence`` follows ``include_essential``; the finite-only mean is
    always reported alongside (0.0 when there are no finite pairs).
    """
    if not diagram.pairs:
        raise ValueError("empty persistence diagram")
    selected = diagram.persistences(include_essential)
    finite = diagram.persistences(False)
    avg = float(selected.mean()) if selected.size else 0.0
    return TopoMetrics(
        n_saddles=tree.n_saddles,
        n_minima=tree.n_minima,
        avg_persistence=avg,
        avg_persistence_finite_only=float(finite.mean()) if finite.size else 0.0,
        include_essential=include_essential,
    )


def top_eigenvalues(grad, theta, tol=1e-6, max_iter=1000, seed=0, step=1e-4):
    pair = top2_eigenvectors(grad, theta, tol=tol, max_iter=max_iter, seed=seed, step=step)
    lam1, lam2 = pair.provenance["eigenvalues"]
    return lam1, lam2


def rademacher(rng, dim):
    return rng.integers(0, 2, size=dim).astype(np.float64) * 2.0 - 1.0


def hessian_trace(grad, theta, n_probes=100, seed=0, step=1e-4):
    """Hutchinson estimate: mean of v^T H v over Rademacher probes."""
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    theta = np.asarray(theta, dtype=np.float64)
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(n_probes):
        v = rademacher(rng, theta.size)
        total += float(v @ hvp(grad, theta, v, step))
    return total / n_probes


def lanczos(matvec, v0, m, breakdown=1e-12):
    """``m``-step Lanczos with full reorthogonalization.

    Returns the tridiagonal coefficients ``(alpha, beta)`` actually computed;
    on breakdown the run is truncated at that step.
    """
    dim = v0.size
    m = min(m, dim)
    Q = np.zeros((m, dim))
    alpha, beta = [], []
    q = v0 / np.linalg.norm(v0)
    for j in range(m):
        Q[j] = q
        w = matvec(q)
        a = float(q @ w)
        alpha.append(a)
        w = w - Q[:j + 1].T @ (Q[:j + 1] @ w)
        w = w - Q[:j + 1].T @ (Q[:j + 1] @ w)
        if j == m - 1:
            break
        b = float(np.linalg.norm(w))
        if b < breakdown:
            break
        beta.append(b)
        q = w / b
    return np.array(alpha), np.array(beta)


@dataclass(frozen=True)
class Esd:
    nodes: np.ndarray        # Ritz values of all probes
    node_weights: np.ndarray  # quadrature weights, averaged over probes (sum 1)
    edges: np.ndarray
    weights: np.ndarray      # histogram mass per bin (sum 1)
    steps: tuple             # Lanczos steps completed per probe

    def to_json(self):
        return {"edges": self.edges.tolist(), "weights": self.weights.tolist()}

    def mean(self):
        centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        return float(self.weights @ centers)


def hessian_esd(grad, theta, order=30, n_probes=10, seed=0, bins=100, step=1e-4):
    """Spectral density by stochastic Lanczos quadrature, binned into a histogram."""
    if order < 2:
        raise ValueError("Lanczos order must be >= 2")
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    theta = np.asarray(theta, dtype=np.float64)
    rng = np.random.default_rng(seed)
    nodes, node_w, steps = [], [], []

    def matvec(v):
        return hvp(grad, theta, v, step)

    for _ in range(n_probes):
        v = rademacher(rng, theta.size)
        alpha, beta = lanczos(matvec, v, order)
        if alpha.size == 1:
            ritz, vecs = alpha.copy(), np.ones((1, 1))
        else:
            ritz, vecs = eigh_tridiagonal(alpha, beta)
        nodes.append(ritz)
        node_w.append(vecs[0] ** 2 / n_probes)
        steps.append(int(alpha.size))
    nodes = np.concatenate(nodes)
    node_w = np.concatenate(node_w)
    lo, hi = nodes.min(), nodes.max()
    margin = max(1e-3 * max(abs(lo), abs(hi)), 0.05 * (hi - lo), 1e-12)
    edges = np.linspace(lo - margin, hi + margin, bins + 1)
    idx = np.clip(np.searchsorted(edges, nodes, side="right") - 1, 0, bins - 1)
    weights = np.bincount(idx, weights=node_w, minlength=bins)
    weights = weights / weights.sum()
    return Esd(nodes, node_w, edges, weights, tuple(steps))


@dataclass(frozen=True)
class HessianSummary:
    lambda1: float
    lambda2: float
    trace_estimate: float
    trace_probes: int
    esd: Esd | None = None
