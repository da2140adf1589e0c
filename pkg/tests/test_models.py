import numpy as np
import pytest

from lossscape.models import (
    ConvectionPinnSpec,
    MlpSpec,
    NumericError,
    ShapeError,
    TrainingDiverged,
    analytic_field,
    load_theta,
    mlp_accuracy,
    mlp_grad,
    mlp_loss,
    mlp_loss_and_grad,
    pinn_grad,
    pinn_loss,
    pinn_loss_and_grad,
    save_theta,
    train,
)
from lossscape.models import network
from lossscape.models.pinn import (
    abs_error,
    analytic_solution_field,
    dual_forward,
    pinn_grad_fd,
    pinn_loss_terms,
    pinn_points,
)
from lossscape.oracle import grid_local_minima
from mp_oracle import mlp_partial_mp


def central_fd(f, theta, rel_step):
    theta = np.array(theta, dtype=np.float64)
    g = np.empty_like(theta)
    for i in range(theta.size):
        h = rel_step * (1.0 + abs(theta[i]))
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2.0 * h)
    return g


def assert_coordinatewise(grad, ref, rtol, floor):
    err = np.abs(grad - ref) / np.maximum(np.abs(ref), floor)
    assert err.max() < rtol, err.max()


# ---- MLP -----------------------------------------------------------------------------

def test_mlp_zero_weights_mse_is_one():
    spec = MlpSpec((2, 8, 8, 1))
    assert mlp_loss(spec, np.zeros(spec.dim)) == 1.0


@pytest.mark.parametrize("loss", ["mse", "ce"])
def test_mlp_loss_nonnegative_and_deterministic(loss):
    spec = MlpSpec((2, 8, 1), loss=loss)
    theta = spec.init(0)
    a = mlp_loss(spec, theta)
    b = mlp_loss(spec, theta.copy())
    assert a >= 0.0 and a == b
    assert mlp_loss_and_grad(spec, theta)[0] == a
    for seed in range(5):
        assert mlp_loss(spec, np.random.default_rng(seed).normal(size=spec.dim) * 3) >= 0.0


@pytest.mark.parametrize("loss", ["mse", "ce"])
@pytest.mark.parametrize("widths", [(2, 8, 1), (2, 6, 6, 6, 1)])
def test_mlp_grad_matches_finite_differences(loss, widths):
    spec = MlpSpec(widths, loss=loss)
    rng = np.random.default_rng(11)
    for _ in range(5):
        theta = rng.normal(size=spec.dim)
        fd = central_fd(lambda th: mlp_loss(spec, th), theta, 1e-5)
        assert_coordinatewise(mlp_grad(spec, theta), fd, 1e-5, 1e-6)


def test_mlp_grad_matches_high_precision_reference():
    # central FD is rounding-limited on tiny coordinates; a 40-digit reference is not
    spec = MlpSpec((2, 8, 8, 1))
    rng = np.random.default_rng(5)
    rng.normal(size=spec.dim)
    theta = rng.normal(size=spec.dim)
    g = mlp_grad(spec, theta)
    for i in (int(np.argmin(np.abs(g))), int(np.argmax(np.abs(g))), 0, spec.dim - 1):
        ref = mlp_partial_mp(spec, theta, i)
        assert abs(g[i] - ref) <= 1e-10 * abs(ref)


def test_linear_network_gradient_closed_form():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    w = rng.normal(size=3)
    theta = np.concatenate([w, [0.0]])  # W (1x3) then bias
    _, g = network.loss_and_grad((3, 1), theta, X, y, "mse", "linear")
    expected = 2.0 * X.T @ (X @ w - y) / X.shape[0]
    np.testing.assert_allclose(g[:3], expected, rtol=1e-12, atol=1e-14)
    assert g[3] == pytest.approx(2.0 * np.mean(X @ w - y), abs=1e-14)


def test_interpolating_linear_minimizer_is_stationary():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(3, 6))
    y = rng.normal(size=3)
    Xa = np.hstack([X, np.ones((3, 1))])
    sol = np.linalg.lstsq(Xa, y, rcond=None)[0]
    loss, g = network.loss_and_grad((6, 1), sol, X, y, "mse", "linear")
    assert loss < 1e-25
    assert np.linalg.norm(g) < 1e-10


def test_mlp_shape_errors():
    spec = MlpSpec((2, 4, 1))
    with pytest.raises(ShapeError):
        mlp_loss(spec, np.zeros(spec.dim + 1))
    with pytest.raises(ShapeError):
        MlpSpec((2, 1))


def test_mlp_trains_below_threshold():
    spec = MlpSpec((2, 8, 8, 1))
    res = train(lambda th: mlp_loss_and_grad(spec, th), spec.init(0), 3000, lr=5e-3)
    assert res.final_loss < 0.1
    assert mlp_accuracy(spec, res.theta) > 0.95


# ---- PINN ----------------------------------------------------------------------------

def test_exact_solution_annihilates_residual_and_initial_terms():
    for beta in (1.0, 4.5, 10.0):
        spec = ConvectionPinnSpec(beta=beta)
        terms = pinn_loss_terms(spec, analytic_solution_field(beta))
        assert terms["residual"] < 1e-10
        assert terms["initial"] < 1e-10
        assert terms["boundary"] < 1e-10


def test_exact_solution_pointwise_residual():
    beta = 7.0
    spec = ConvectionPinnSpec(beta=beta)
    p = pinn_points(spec)
    _, ux, ut = analytic_solution_field(beta)(p.x_f, p.t_f)
    assert np.max(np.abs(ut + beta * ux)) < 1e-10


def test_zero_network_initial_term_is_mean_of_squared_sine():
    spec = ConvectionPinnSpec(beta=3.0)
    terms = pinn_loss_terms(spec, lambda x, t: (np.zeros_like(x), np.zeros_like(x), np.zeros_like(x)))
    assert terms["residual"] == 0.0 and terms["boundary"] == 0.0
    # independent quadrature of sin^2 over one period, normalised by its length
    xs = np.linspace(0.0, 2 * np.pi, 20001)
    quad = np.trapezoid(np.sin(xs) ** 2, xs) / (2 * np.pi)
    assert terms["initial"] == pytest.approx(quad, abs=1e-8)
    assert pinn_loss(spec, np.zeros(spec.dim)) == pytest.approx(quad, abs=1e-8)


def test_network_input_derivatives_are_exact():
    spec = ConvectionPinnSpec()
    theta = spec.init(3)
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 6, 20)
    t = rng.uniform(0, 1, 20)
    u, ux, ut, _ = dual_forward(spec.net_widths, theta, x, t)
    h = 1e-6
    fx = (dual_forward(spec.net_widths, theta, x + h, t)[0] - dual_forward(spec.net_widths, theta, x - h, t)[0]) / (2 * h)
    ft = (dual_forward(spec.net_widths, theta, x, t + h)[0] - dual_forward(spec.net_widths, theta, x, t - h)[0]) / (2 * h)
    np.testing.assert_allclose(ux, fx, atol=1e-8)
    np.testing.assert_allclose(ut, ft, atol=1e-8)


def test_pinn_backprop_matches_finite_differences():
    spec = ConvectionPinnSpec(beta=5.0, net_widths=(2, 6, 6, 1), n_f=60, n_u=20, n_b=10)
    rng = np.random.default_rng(5)
    for _ in range(5):
        theta = rng.normal(size=spec.dim) * 0.7
        fd = central_fd(lambda th: pinn_loss(spec, th), theta, 1e-5)
        assert_coordinatewise(pinn_grad(spec, theta), fd, 1e-5, 1e-6)


def test_pinn_fd_gradient_is_consistent_under_step_halving():
    spec = ConvectionPinnSpec(beta=2.0, net_widths=(2, 5, 1), n_f=40, n_u=10, n_b=5)
    theta = spec.init(0)
    central = pinn_grad_fd(spec, theta, step=1e-4)
    exact = pinn_grad(spec, theta)
    assert np.linalg.norm(central - exact) / np.linalg.norm(exact) < 1e-7

    base = pinn_loss(spec, theta)

    def one_sided(step):
        g = np.empty_like(theta)
        for i in range(theta.size):
            h = step * (1.0 + abs(theta[i]))
            th = theta.copy()
            th[i] += h
            g[i] = (pinn_loss(spec, th) - base) / h
        return g

    e1 = np.linalg.norm(one_sided(1e-4) - central)
    e2 = np.linalg.norm(one_sided(0.5e-4) - central)
    # first-order scheme: the discrepancy halves with the step
    assert 0.4 < e2 / e1 < 0.6


def test_pinn_descent_step_decreases_loss():
    spec = ConvectionPinnSpec(beta=2.0)
    theta = spec.init(1)
    loss, g = pinn_loss_and_grad(spec, theta)
    assert pinn_loss(spec, theta - 1e-4 * g) < loss
    assert pinn_loss_and_grad(spec, theta)[0] == pinn_loss(spec, theta)


def test_pinn_training_reduces_gradient_and_error():
    spec = ConvectionPinnSpec(beta=1.0)
    theta0 = spec.init(0)
    res = train(lambda th: pinn_loss_and_grad(spec, th), theta0, 1500, lr=5e-3)
    assert np.linalg.norm(pinn_grad(spec, res.theta)) < np.linalg.norm(pinn_grad(spec, theta0))
    assert abs_error(spec, res.theta) < abs_error(spec, theta0)


@pytest.mark.parametrize("beta", [float(b) for b in range(1, 11)])
def test_beta_range_accepted(beta):
    spec = ConvectionPinnSpec(beta=beta)
    assert np.isfinite(pinn_loss(spec, spec.init(0)))


def test_pinn_rejects_bad_specs():
    with pytest.raises(ValueError):
        ConvectionPinnSpec(beta=0.0)
    with pytest.raises(ValueError):
        ConvectionPinnSpec(n_f=0)
    with pytest.raises(ValueError):
        ConvectionPinnSpec(residual_weight=-1.0)
    with pytest.raises(ShapeError):
        pinn_loss(ConvectionPinnSpec(), np.zeros(3))


def test_pinn_non_finite_term_is_named():
    spec = ConvectionPinnSpec()
    theta = spec.init(0)
    theta[-1] = np.nan
    with pytest.raises(NumericError, match="initial"):
        pinn_loss(spec, theta)


def test_per_point_residual_weights():
    spec1 = ConvectionPinnSpec(beta=2.0, n_f=20)
    spec2 = ConvectionPinnSpec(beta=2.0, n_f=20, residual_weights=(2.0,) * 20)
    theta = spec1.init(0)
    t1 = pinn_loss_terms(spec1, lambda x, t: dual_forward(spec1.net_widths, theta, x, t)[:3])
    t2 = pinn_loss_terms(spec2, lambda x, t: dual_forward(spec2.net_widths, theta, x, t)[:3])
    assert t2["residual"] == pytest.approx(2.0 * t1["residual"], rel=1e-14)


# ---- training ------------------------------------------------------------------------

def test_adam_on_quadratic_bowl():
    res = train(lambda th: (0.5 * th @ th, th.copy()), np.ones(10), 2000, lr=0.01)
    assert np.linalg.norm(res.theta) < 1e-3
    assert res.losses.size == 2001


def test_training_is_deterministic():
    spec = MlpSpec((2, 8, 1))
    a = train(lambda th: mlp_loss_and_grad(spec, th), spec.init(4), 200, lr=1e-2)
    b = train(lambda th: mlp_loss_and_grad(spec, th), spec.init(4), 200, lr=1e-2)
    assert np.array_equal(a.theta, b.theta)
    assert np.array_equal(a.losses, b.losses)


def test_divergence_carries_last_finite_iterate():
    with pytest.raises(TrainingDiverged) as info:
        train(lambda th: (float(-th[0]) if th[0] < 3 else np.nan, np.array([-1.0])), np.zeros(1), 10000, lr=0.5)
    assert np.isfinite(info.value.theta).all()
    assert info.value.theta[0] >= 3


def test_train_requires_steps():
    with pytest.raises(ValueError):
        train(lambda th: (0.0, th), np.zeros(2), 0)


# ---- analytic fields -----------------------------------------------------------------

def test_constant_field():
    f = analytic_field("constant", 7, (-1, 1), c=3.25)
    assert np.all(f.values == 3.25) and f.n_vertices == 49


def test_himmelblau_has_four_grid_minima():
    f = analytic_field("himmelblau", 201, (-6.0, 6.0))
    vals = f.values.reshape(201, 201)
    assert len(grid_local_minima(vals)) == 4


def test_gaussian_mixture_grid_minima_golden():
    # golden count from an independent scipy minimum_filter scan at 101^2 and 201^2
    for res in (101, 201):
        f = analytic_field("gaussian_mixture", res, (-1.0, 1.0), m=5, seed=1)
        assert len(grid_local_minima(f.values.reshape(res, res))) == 5


def test_unknown_analytic_field():
    with pytest.raises(ValueError, match="unknown"):
        analytic_field("rosenbrock", 5, (-1, 1))
    with pytest.raises(ValueError):
        analytic_field("constant", 1, (-1, 1))


def test_theta_file_round_trip(tmp_path):
    spec = ConvectionPinnSpec()
    theta = spec.init(9)
    path = save_theta(tmp_path / "theta.csv", theta, spec.layout)
    loaded, layout = load_theta(path)
    assert np.array_equal(loaded, theta)
    assert layout == spec.layout
