"""Orthonormal direction pairs spanning the sampled 2D subspace.

Random pairs are Gaussian draws orthonormalized by Gram-Schmidt. Hessian
pairs come from power iteration on finite-difference Hessian-vector products,
the second vector by deflation against the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lossscape.models.params import load_vectors, save_vectors

__all__ = [
    "DirectionPair",
    "PowerIterationError",
    "random_pair",
    "hvp",
    "power_iteration",
    "top2_eigenvectors",
    "rescale_per_layer",
    "save_directions",
    "load_directions",
]


class PowerIterationError(ArithmeticError):
    """Power iteration hit ``max_iter``; carries the best iterate and its residual."""

    def __init__(self, message, vector, eigenvalue, residual):
        super().__init__(message)
        self.vector = vector
        self.eigenvalue = eigenvalue
        self.residual = residual


@dataclass(frozen=True, eq=False)
class DirectionPair:
    delta1: np.ndarray
    delta2: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        d1 = np.array(self.delta1, dtype=np.float64).reshape(-1)
        d2 = np.array(self.delta2, dtype=np.float64).reshape(-1)
        if d1.shape != d2.shape:
            raise ValueError("directions differ in dimension")
        d1.setflags(write=False)
        d2.setflags(write=False)
        object.__setattr__(self, "delta1", d1)
        object.__setattr__(self, "delta2", d2)

    @property
    def dim(self):
        return self.delta1.size

    def is_orthonormal(self, norm_tol=1e-12, dot_tol=1e-10):
        return (abs(np.linalg.norm(self.delta1) - 1.0) <= norm_tol
                and abs(np.linalg.norm(self.delta2) - 1.0) <= norm_tol
                and abs(self.delta1 @ self.delta2) < dot_tol)

    def negated(self, first=True, second=False):
        return DirectionPair(-self.delta1 if first else self.delta1,
                             -self.delta2 if second else self.delta2,
                             dict(self.provenance))


def _unit(v):
    return v / np.linalg.norm(v)


def _gram_schmidt(v1, v2):
    d1 = _unit(v1)
    d2 = v2 - (d1 @ v2) * d1
    d2 = d2 - (d1 @ d2) * d1   # second pass for orthogonality to rounding level
    return d1, _unit(d2)


def random_pair(dim, seed):
    """Two i.i.d. standard-normal vectors, orthonormalized explicitly."""
    if dim < 2:
        raise ValueError("need dim >= 2 for two orthonormal directions")
    rng = np.random.default_rng(seed)
    v1 = rng.standard_normal(dim)
    v2 = rng.standard_normal(dim)
    raw_cos = float(v1 @ v2 / (np.linalg.norm(v1) * np.linalg.norm(v2)))
    d1, d2 = _gram_schmidt(v1, v2)
    return DirectionPair(d1, d2, {"kind": "random", "seed": int(seed),
                                  "orthonormalized": "gram-schmidt", "raw_cosine": raw_cos,
                                  "normalization": "unit"})


def hvp(grad, theta, v, step=1e-4):
    """Hessian-vector product by central differences of the gradient along v/|v|."""
    theta = np.asarray(theta, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nv = np.linalg.norm(v)
    if not nv > 0:
        raise ValueError("hvp needs a non-zero vector")
    eps = step * (1.0 + np.linalg.norm(theta))
    u = v / nv
    gp = grad(theta + eps * u)
    gm = grad(theta - eps * u)
    out = (np.asarray(gp) - np.asarray(gm)) * (nv / (2.0 * eps))
    if not np.all(np.isfinite(out)):
        raise ArithmeticError("non-finite gradient in Hessian-vector product")
    return out


@dataclass
class PowerResult:
    eigenvalue: float
    vector: np.ndarray
    iterations: int
    residual: float
    rayleigh: list


def power_iteration(matvec, v0, tol=1e-6, max_iter=1000, deflate=()):
    """Dominant (largest |lambda|) eigenpair of a symmetric operator.

    Vectors in ``deflate`` are projected out of every iterate. Stops when two
    successive Rayleigh quotients differ by less than ``tol`` relative.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    def project(x):
        for d in deflate:
            x = x - (d @ x) * d
        return x

    v = _unit(project(np.asarray(v0, dtype=np.float64)))
    hv = matvec(v)
    lam = float(v @ hv)
    history = [lam]
    best = (np.inf, v, lam)
    for it in range(1, max_iter + 1):
        w = project(hv)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v is in the null space of the (deflated) operator
            return PowerResult(0.0, v, it, 0.0, history)
        v = _unit(project(w / nw))
        hv = matvec(v)
        new = float(v @ hv)
        history.append(new)
        residual = float(np.linalg.norm(project(hv) - new * v))
        if residual < best[0]:
            best = (residual, v, new)
        if abs(new - lam) <= tol * max(abs(new), np.finfo(float).tiny):
            return PowerResult(new, v, it, residual, history)
        lam = new
    raise PowerIterationError(
        f"power iteration did not converge in {max_iter} iterations (residual {best[0]:.3e})",
        best[1], best[2], best[0])


def top2_eigenvectors(grad, theta, tol=1e-6, max_iter=1000, seed=0, step=1e-4):
    """Top two Hessian eigenpairs (by magnitude) as a direction pair."""
    theta = np.asarray(theta, dtype=np.float64)
    rng = np.random.default_rng(seed)

    def matvec(v):
        return hvp(grad, theta, v, step)

    first = power_iteration(matvec, rng.standard_normal(theta.size), tol, max_iter)
    second = power_iteration(matvec, rng.standard_normal(theta.size), tol, max_iter,
                             deflate=(first.vector,))
    if abs(second.eigenvalue) > abs(first.eigenvalue):
        first, second = second, first
    d1, d2 = _gram_schmidt(first.vector, second.vector)
    residuals = [float(np.linalg.norm(matvec(d) - lam * d))
                 for d, lam in ((d1, first.eigenvalue), (d2, second.eigenvalue))]
    prov = {
        "kind": "hessian",
        "seed": int(seed),
        "eigenvalues": [first.eigenvalue, second.eigenvalue],
        "iterations": [first.iterations, second.iterations],
        "residuals": residuals,
        "tol": tol,
        "hvp_step": step,
        "normalization": "unit",
    }
    return DirectionPair(d1, d2, prov)


def rescale_per_layer(pair, theta, layout):
    """Scale each layer segment of both directions to the norm of that segment of theta.

    The result is no longer orthonormal; provenance records the normalization.
    """
    theta = np.asarray(theta, dtype=np.float64)
    out = []
    for d in (pair.delta1, pair.delta2):
        d = d.copy()
        for _, _, sl in layout.slices():
            nd = np.linalg.norm(d[sl])
            if nd > 0:
                d[sl] *= np.linalg.norm(theta[sl]) / nd
        out.append(d)
    prov = dict(pair.provenance, normalization="per-layer")
    return DirectionPair(out[0], out[1], prov)


def save_directions(path, pair):
    return save_vectors(path, [pair.delta1, pair.delta2], {"provenance": pair.provenance})


def load_directions(path):
    header, cols = load_vectors(path)
    return DirectionPair(cols[0], cols[1], header.get("provenance", {}))
