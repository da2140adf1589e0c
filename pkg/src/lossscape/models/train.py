"""Full-batch Adam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TrainingDiverged(ArithmeticError):
    """Loss or gradient became non-finite; ``theta`` is the last finite iterate."""

    def __init__(self, step, theta, losses):
        super().__init__(f"training diverged at step {step}")
        self.step = step
        self.theta = theta
        self.losses = losses


@dataclass
class TrainResult:
    theta: np.ndarray
    losses: np.ndarray   # loss at each iterate before its update, then the final loss
    final_loss: float


def train(loss_and_grad, theta0, steps, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Run ``steps`` Adam updates from ``theta0``.

    ``loss_and_grad(theta) -> (float, ndarray)``. Full batch, so the result
    depends only on the inputs.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    theta = np.array(theta0, dtype=np.float64, copy=True)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    losses = []
    for step in range(1, steps + 1):
        loss, g = loss_and_grad(theta)
        if not (np.isfinite(loss) and np.all(np.isfinite(g))):
            raise TrainingDiverged(step, theta, np.array(losses))
        losses.append(loss)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** step)
        v_hat = v / (1.0 - beta2 ** step)
        new = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
        if not np.all(np.isfinite(new)):
            raise TrainingDiverged(step, theta, np.array(losses))
        theta = new
    final, _ = loss_and_grad(theta)
    if not np.isfinite(final):
        raise TrainingDiverged(steps + 1, theta, np.array(losses))
    losses.append(final)
    return TrainResult(theta, np.array(losses), float(final))
