"""Tiny tanh MLP classifier on two Gaussian blobs."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from lossscape.models import network
from lossscape.models.params import ShapeError, dense_layout, init_uniform


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple = (2, 8, 1)
    activation: str = "tanh"
    n_points: int = 200
    seed: int = 0
    loss: str = "mse"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 3:
            raise ShapeError("an MLP needs at least one hidden layer")
        if widths[0] != 2 or widths[-1] != 1:
            raise ShapeError("blob data has 2 inputs and 1 output")
        if self.loss not in ("mse", "ce"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.activation not in network.ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.n_points < 2:
            raise ValueError("need at least two data points")

    @property
    def layout(self):
        return dense_layout(self.layer_widths)

    @property
    def dim(self):
        return self.layout.size

    def init(self, seed):
        return init_uniform(self.layer_widths, seed)


@lru_cache(maxsize=32)
def _blobs(n, seed):
    rng = np.random.default_rng(seed)
    n_neg = n // 2
    n_pos = n - n_neg
    centers = np.array([[-1.0, -1.0], [1.0, 1.0]])
    X = np.concatenate([
        centers[0] + 0.6 * rng.standard_normal((n_neg, 2)),
        centers[1] + 0.6 * rng.standard_normal((n_pos, 2)),
    ])
    y = np.concatenate([-np.ones(n_neg), np.ones(n_pos)])
    X.setflags(write=False)
    y.setflags(write=False)
    return X, y


def make_blobs(n=200, seed=0):
    """Two isotropic Gaussian blobs in 2D with labels -1 / +1 (first half / second half)."""
    return _blobs(int(n), int(seed))


def _check(spec, theta):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (spec.dim,):
        raise ShapeError(f"theta has shape {theta.shape}, network expects ({spec.dim},)")
    return theta


def mlp_loss_and_grad(spec, theta):
    theta = _check(spec, theta)
    X, y = make_blobs(spec.n_points, spec.seed)
    return network.loss_and_grad(spec.layer_widths, theta, X, y, spec.loss, spec.activation)


def mlp_loss(spec, theta):
    theta = _check(spec, theta)
    X, y = make_blobs(spec.n_points, spec.seed)
    out, _ = network.forward(spec.layer_widths, theta, X, spec.activation)
    f = out[:, 0]
    if spec.loss == "mse":
        return float(np.mean((f - y) ** 2))
    return float(np.mean(np.logaddexp(0.0, -y * f)))


def mlp_grad(spec, theta):
    return mlp_loss_and_grad(spec, theta)[1]


def mlp_accuracy(spec, theta):
    theta = _check(spec, theta)
    X, y = make_blobs(spec.n_points, spec.seed)
    out, _ = network.forward(spec.layer_widths, theta, X, spec.activation)
    return float(np.mean(np.sign(out[:, 0]) == y))
