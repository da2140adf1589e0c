"""Fully connected networks on a flat parameter vector, with hand-written backprop."""

from __future__ import annotations

import numpy as np

from lossscape.models.params import dense_layout

ACTIVATIONS = ("tanh", "linear")


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_deriv(name, a):
    # derivative expressed through the activation output
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(a)


def forward(widths, theta, X, activation="tanh"):
    """Output of shape (n, widths[-1]) and the per-layer activations.

    Hidden layers use ``activation``; the last layer is affine.
    """
    params = dense_layout(widths).unpack(theta)
    h = np.asarray(X, dtype=np.float64)
    acts = [h]
    n_layers = len(params) // 2
    for i in range(n_layers):
        W, b = params[2 * i], params[2 * i + 1]
        z = h @ W.T + b
        h = z if i == n_layers - 1 else _act(activation, z)
        acts.append(h)
    return h, acts


def backward(widths, theta, acts, grad_out, activation="tanh"):
    """Flat parameter gradient given d(loss)/d(output) of shape (n, widths[-1])."""
    params = dense_layout(widths).unpack(theta)
    n_layers = len(params) // 2
    grads = [None] * len(params)
    g = grad_out
    for i in reversed(range(n_layers)):
        W = params[2 * i]
        h_in = acts[i]
        grads[2 * i] = g.T @ h_in
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0:
            g = (g @ W) * _act_deriv(activation, h_in)
    return np.concatenate([gr.ravel() for gr in grads])


def loss_and_grad(widths, theta, X, y, loss="mse", activation="tanh"):
    """Mean loss over samples for a single-output network and its gradient.

    ``mse``: mean (f(x) - y)^2. ``ce``: binary cross-entropy on the logit f(x)
    with labels y in {-1, +1}, i.e. mean log(1 + exp(-y f(x))).
    """
    out, acts = forward(widths, theta, X, activation)
    f = out[:, 0]
    y = np.asarray(y, dtype=np.float64)
    n = f.size
    if loss == "mse":
        r = f - y
        value = float(np.mean(r * r))
        g = 2.0 * r / n
    elif loss == "ce":
        m = -y * f
        value = float(np.mean(np.logaddexp(0.0, m)))
        # d/df log(1+exp(-y f)) = -y * sigmoid(-y f)
        g = -y * np.exp(m - np.logaddexp(0.0, m)) / n
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return value, backward(widths, theta, acts, g[:, None], activation)
