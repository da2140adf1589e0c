"""Differentiable losses over flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from lossscape.models.analytic import Quadratic, analytic_field
from lossscape.models.mlp import MlpSpec, mlp_accuracy, mlp_grad, mlp_loss, mlp_loss_and_grad
from lossscape.models.params import Layout, ShapeError, dense_layout, load_theta, save_theta
from lossscape.models.pinn import (
    ConvectionPinnSpec,
    NumericError,
    pinn_grad,
    pinn_loss,
    pinn_loss_and_grad,
)
from lossscape.models.train import TrainingDiverged, TrainResult, train


@dataclass(frozen=True)
class Objective:
    """A loss with its gradient, bundled for the samplers and Hessian tools."""

    loss: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    loss_and_grad: Callable
    dim: int
    layout: Layout | None = None


def mlp_objective(spec):
    return Objective(
        loss=lambda th: mlp_loss(spec, th),
        grad=lambda th: mlp_grad(spec, th),
        loss_and_grad=lambda th: mlp_loss_and_grad(spec, th),
        dim=spec.dim,
        layout=spec.layout,
    )


def pinn_objective(spec):
    return Objective(
        loss=lambda th: pinn_loss(spec, th),
        grad=lambda th: pinn_grad(spec, th),
        loss_and_grad=lambda th: pinn_loss_and_grad(spec, th),
        dim=spec.dim,
        layout=spec.layout,
    )


def quadratic_objective(q):
    return Objective(
        loss=q.loss,
        grad=q.grad,
        loss_and_grad=lambda th: (q.loss(th), q.grad(th)),
        dim=q.dim,
    )


__all__ = [
    "ConvectionPinnSpec",
    "Layout",
    "MlpSpec",
    "NumericError",
    "Objective",
    "Quadratic",
    "ShapeError",
    "TrainResult",
    "TrainingDiverged",
    "analytic_field",
    "dense_layout",
    "load_theta",
    "mlp_accuracy",
    "mlp_grad",
    "mlp_loss",
    "mlp_loss_and_grad",
    "mlp_objective",
    "pinn_grad",
    "pinn_loss",
    "pinn_loss_and_grad",
    "pinn_objective",
    "quadratic_objective",
    "save_theta",
    "train",
]
