"""Physics-informed network for the 1D periodic convection problem.

    u_t + beta * u_x = 0,   x in [0, 2 pi], t in [0, T],   u(x, 0) = sin(x)

The loss is the mean squared initial-condition misfit, plus the weighted mean
squared PDE residual on collocation points, plus the mean squared periodic
boundary mismatch u(0, t) - u(2 pi, t). Input derivatives u_x and u_t are
propagated exactly in forward mode alongside the activations; the parameter
gradient is obtained by reverse-mode differentiation of that forward-mode
network, with a finite-difference version kept as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from lossscape.models.params import ShapeError, dense_layout, init_uniform

TWO_PI = 2.0 * np.pi


class NumericError(ArithmeticError):
    """A loss term evaluated to a non-finite number."""


@dataclass(frozen=True)
class ConvectionPinnSpec:
    beta: float = 1.0
    net_widths: tuple = (2, 16, 16, 1)
    n_u: int = 50
    n_f: int = 400
    n_b: int = 50
    seed: int = 0
    residual_weight: float = 1.0
    residual_weights: tuple | None = None
    t_max: float = 1.0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.net_widths)
        object.__setattr__(self, "net_widths", widths)
        if len(widths) < 3 or widths[0] != 2 or widths[-1] != 1 or min(widths) < 1:
            raise ShapeError(f"PINN widths must look like (2, ..., 1), got {widths}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if min(self.n_u, self.n_f, self.n_b) < 1:
            raise ValueError("point counts must be positive")
        if self.residual_weights is not None:
            w = tuple(float(x) for x in self.residual_weights)
            if len(w) != self.n_f:
                raise ValueError("need one residual weight per collocation point")
            object.__setattr__(self, "residual_weights", w)
        weights = self.residual_weights or (self.residual_weight,)
        if min(weights) <= 0:
            raise ValueError("residual weights must be positive")

    @property
    def layout(self):
        return dense_layout(self.net_widths)

    @property
    def dim(self):
        return self.layout.size

    def init(self, seed):
        return init_uniform(self.net_widths, seed)


@dataclass(frozen=True)
class PinnPoints:
    x_u: np.ndarray   # initial-condition abscissae, t = 0
    u0: np.ndarray
    x_f: np.ndarray   # collocation points
    t_f: np.ndarray
    lam: np.ndarray
    t_b: np.ndarray   # boundary times


def initial_condition(x):
    return np.sin(x)


def exact_solution(x, t, beta):
    return np.sin(x - beta * t)


@lru_cache(maxsize=64)
def pinn_points(spec):
    """Training points: uniform grids for the initial and boundary sets, seeded uniform collocation."""
    rng = np.random.default_rng(spec.seed)
    x_u = np.linspace(0.0, TWO_PI, spec.n_u, endpoint=False)
    x_f = rng.uniform(0.0, TWO_PI, spec.n_f)
    t_f = rng.uniform(0.0, spec.t_max, spec.n_f)
    if spec.residual_weights is not None:
        lam = np.array(spec.residual_weights, dtype=np.float64)
    else:
        lam = np.full(spec.n_f, float(spec.residual_weight))
    t_b = np.linspace(0.0, spec.t_max, spec.n_b)
    pts = PinnPoints(x_u, initial_condition(x_u), x_f, t_f, lam, t_b)
    for a in (pts.x_u, pts.u0, pts.x_f, pts.t_f, pts.lam, pts.t_b):
        a.setflags(write=False)
    return pts


def _stack_inputs(spec):
    """All evaluation points in one batch: initial | collocation | x=0 | x=2 pi."""
    p = pinn_points(spec)
    x = np.concatenate([p.x_u, p.x_f, np.zeros(spec.n_b), np.full(spec.n_b, TWO_PI)])
    t = np.concatenate([np.zeros(spec.n_u), p.t_f, p.t_b, p.t_b])
    return x, t


def dual_forward(widths, theta, x, t):
    """Network output with exact du/dx, du/dt; also returns the tape for :func:`dual_backward`."""
    params = dense_layout(widths).unpack(theta)
    n = x.size
    h = np.stack([x, t], axis=1)
    hx = np.zeros((n, 2))
    hx[:, 0] = 1.0
    ht = np.zeros((n, 2))
    ht[:, 1] = 1.0
    tape = []
    n_layers = len(params) // 2
    for i in range(n_layers):
        W, b = params[2 * i], params[2 * i + 1]
        z = h @ W.T + b
        zx = hx @ W.T
        zt = ht @ W.T
        if i == n_layers - 1:
            tape.append((h, hx, ht, None, None, None, None))
            h, hx, ht = z, zx, zt
        else:
            a = np.tanh(z)
            s = 1.0 - a * a
            tape.append((h, hx, ht, a, s, zx, zt))
            h, hx, ht = a, s * zx, s * zt
    return h[:, 0], hx[:, 0], ht[:, 0], tape


def dual_backward(widths, theta, tape, gu, gux, gut):
    """Parameter gradient given cotangents for u, u_x and u_t."""
    params = dense_layout(widths).unpack(theta)
    n_layers = len(params) // 2
    grads = [None] * len(params)
    g, gx, gt = gu[:, None], gux[:, None], gut[:, None]
    for i in reversed(range(n_layers)):
        W = params[2 * i]
        h_in, hx_in, ht_in, a, s, zx, zt = tape[i]
        if a is not None:
            gzx = gx * s
            gzt = gt * s
            gs = gx * zx + gt * zt
            g = (g - 2.0 * a * gs) * s
            gx, gt = gzx, gzt
        grads[2 * i] = g.T @ h_in + gx.T @ hx_in + gt.T @ ht_in
        grads[2 * i + 1] = g.sum(axis=0)
        g, gx, gt = g @ W, gx @ W, gt @ W
    return np.concatenate([gr.ravel() for gr in grads])


def _check(spec, theta):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (spec.dim,):
        raise ShapeError(f"theta has shape {theta.shape}, network expects ({spec.dim},)")
    return theta


def network_field(spec, theta):
    """``(x, t) -> (u, u_x, u_t)`` for the network at ``theta``."""
    theta = _check(spec, theta)

    def field(x, t):
        u, ux, ut, _ = dual_forward(spec.net_widths, theta, np.asarray(x, float), np.asarray(t, float))
        return u, ux, ut

    return field


def analytic_solution_field(beta):
    """The exact solution with its derivatives, usable wherever a network field is."""

    def field(x, t):
        x = np.asarray(x, float)
        t = np.asarray(t, float)
        c = np.cos(x - beta * t)
        return np.sin(x - beta * t), c, -beta * c

    return field


def _terms_from_outputs(spec, u, ux, ut):
    p = pinn_points(spec)
    nu, nf, nb = spec.n_u, spec.n_f, spec.n_b
    u_init = u[:nu]
    r = ut[nu:nu + nf] + spec.beta * ux[nu:nu + nf]
    d = u[nu + nf:nu + nf + nb] - u[nu + nf + nb:]
    e = u_init - p.u0
    terms = {
        "initial": float(np.mean(e * e)),
        "residual": float(np.mean(p.lam * r * r)),
        "boundary": float(np.mean(d * d)),
    }
    for name, value in terms.items():
        if not np.isfinite(value):
            raise NumericError(f"non-finite {name} term in PINN loss")
    return terms, (e, r, d)


def pinn_loss_terms(spec, field):
    """The three loss terms for any ``field(x, t) -> (u, u_x, u_t)``."""
    x, t = _stack_inputs(spec)
    u, ux, ut = field(x, t)
    return _terms_from_outputs(spec, u, ux, ut)[0]


def _total(terms):
    return terms["initial"] + terms["residual"] + terms["boundary"]


def pinn_loss(spec, theta):
    return _total(pinn_loss_terms(spec, network_field(spec, theta)))


def pinn_loss_and_grad(spec, theta):
    theta = _check(spec, theta)
    x, t = _stack_inputs(spec)
    u, ux, ut, tape = dual_forward(spec.net_widths, theta, x, t)
    terms, (e, r, d) = _terms_from_outputs(spec, u, ux, ut)
    p = pinn_points(spec)
    nu, nf, nb = spec.n_u, spec.n_f, spec.n_b
    gu = np.zeros_like(u)
    gux = np.zeros_like(u)
    gut = np.zeros_like(u)
    gu[:nu] = 2.0 * e / nu
    gr = 2.0 * p.lam * r / nf
    gut[nu:nu + nf] = gr
    gux[nu:nu + nf] = spec.beta * gr
    gu[nu + nf:nu + nf + nb] = 2.0 * d / nb
    gu[nu + nf + nb:] = -2.0 * d / nb
    grad = dual_backward(spec.net_widths, theta, tape, gu, gux, gut)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite PINN gradient")
    return _total(terms), grad


def pinn_grad_fd(spec, theta, step=1e-4):
    """Central differences with per-coordinate step ``step * (1 + |theta_i|)``."""
    theta = _check(spec, theta).copy()
    g = np.empty_like(theta)
    for i in range(theta.size):
        h = step * (1.0 + abs(theta[i]))
        old = theta[i]
        theta[i] = old + h
        fp = pinn_loss(spec, theta)
        theta[i] = old - h
        fm = pinn_loss(spec, theta)
        theta[i] = old
        g[i] = (fp - fm) / (2.0 * h)
    return g


def pinn_grad(spec, theta, method="backprop", step=1e-4):
    if method == "backprop":
        return pinn_loss_and_grad(spec, theta)[1]
    if method == "fd":
        return pinn_grad_fd(spec, theta, step)
    raise ValueError(f"unknown gradient method {method!r}")


def abs_error(spec, theta, nx=128, nt=64):
    """Mean |u_net - sin(x - beta t)| on a fixed ``nx`` x ``nt`` evaluation grid."""
    xs = np.linspace(0.0, TWO_PI, nx)
    ts = np.linspace(0.0, spec.t_max, nt)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    u, _, _ = network_field(spec, theta)(X.ravel(), T.ravel())
    return float(np.mean(np.abs(u - exact_solution(X.ravel(), T.ravel(), spec.beta))))
