import numpy as np
import pytest

from lossscape.directions import (
    DirectionPair,
    PowerIterationError,
    hvp,
    load_directions,
    power_iteration,
    random_pair,
    rescale_per_layer,
    save_directions,
    top2_eigenvectors,
)
from lossscape.models import MlpSpec, mlp_grad, mlp_loss_and_grad, train


def quad_grad(A):
    return lambda th: A @ th


@pytest.fixture(scope="module")
def trained_mlp():
    spec = MlpSpec((2, 8, 1))
    res = train(lambda th: mlp_loss_and_grad(spec, th), spec.init(0), 1500, lr=1e-2)
    return spec, res.theta


# ---- random pairs --------------------------------------------------------------------

@pytest.mark.parametrize("dim", [2, 3, 10, 1000])
def test_random_pair_is_orthonormal(dim):
    pair = random_pair(dim, 7)
    assert abs(np.linalg.norm(pair.delta1) - 1.0) < 1e-12
    assert abs(np.linalg.norm(pair.delta2) - 1.0) < 1e-12
    assert abs(pair.delta1 @ pair.delta2) < 1e-10
    assert pair.is_orthonormal()


def test_random_pair_is_deterministic():
    a, b = random_pair(50, 3), random_pair(50, 3)
    assert np.array_equal(a.delta1, b.delta1) and np.array_equal(a.delta2, b.delta2)
    assert not np.array_equal(a.delta1, random_pair(50, 4).delta1)
    assert a.provenance["kind"] == "random" and a.provenance["seed"] == 3


def test_raw_gaussian_draws_are_nearly_orthogonal():
    # the cosine before orthonormalization shrinks like 1/sqrt(dim)
    cos = [abs(random_pair(1000, s).provenance["raw_cosine"]) for s in range(100)]
    assert np.mean(cos) < 0.05


def test_random_pair_rejects_dim_one():
    with pytest.raises(ValueError):
        random_pair(1, 0)


# ---- Hessian-vector products ---------------------------------------------------------

def test_hvp_on_diagonal_quadratic():
    A = np.diag(np.arange(1.0, 6.0))
    g = quad_grad(A)
    theta = np.array([0.3, -1.0, 2.0, 0.0, 5.0])
    for i in range(5):
        e = np.zeros(5)
        e[i] = 1.0
        np.testing.assert_allclose(hvp(g, theta, e), A[i], atol=1e-8)


def test_hvp_is_linear():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(6, 6))
    A = M + M.T
    g = quad_grad(A)
    theta = rng.normal(size=6)
    u, v = rng.normal(size=6), rng.normal(size=6)
    np.testing.assert_allclose(hvp(g, theta, 2.0 * u - 3.0 * v),
                               2.0 * hvp(g, theta, u) - 3.0 * hvp(g, theta, v), atol=1e-8)
    np.testing.assert_allclose(hvp(g, theta, u), A @ u, atol=1e-8)


def test_hvp_symmetry_on_mlp(trained_mlp):
    spec, theta = trained_mlp
    rng = np.random.default_rng(1)
    g = lambda th: mlp_grad(spec, th)
    for _ in range(5):
        u, v = rng.normal(size=spec.dim), rng.normal(size=spec.dim)
        a, b = u @ hvp(g, theta, v), v @ hvp(g, theta, u)
        assert abs(a - b) <= 1e-6 * max(abs(a), abs(b))


def test_hvp_rejects_zero_vector():
    with pytest.raises(ValueError):
        hvp(quad_grad(np.eye(2)), np.zeros(2), np.zeros(2))


# ---- power iteration -----------------------------------------------------------------

def test_top2_on_diagonal():
    A = np.diag([10.0, 3.0, 1.0, 1.0, 0.5, 0.2])
    pair = top2_eigenvectors(quad_grad(A), np.zeros(6), tol=1e-12, max_iter=5000)
    lam = pair.provenance["eigenvalues"]
    assert lam[0] == pytest.approx(10.0, abs=1e-8)
    assert lam[1] == pytest.approx(3.0, abs=1e-8)
    assert abs(abs(pair.delta1[0]) - 1.0) < 1e-6
    assert abs(abs(pair.delta2[1]) - 1.0) < 1e-6
    assert pair.is_orthonormal()


def test_top2_diag_one_to_ten():
    A = np.diag(np.arange(1.0, 11.0))
    pair = top2_eigenvectors(quad_grad(A), np.zeros(10), tol=1e-12, max_iter=20000)
    lam = pair.provenance["eigenvalues"]
    assert lam[0] == pytest.approx(10.0, abs=1e-5)
    assert lam[1] == pytest.approx(9.0, abs=1e-5)


def test_degenerate_top_eigenvalue():
    pair = top2_eigenvectors(quad_grad(10.0 * np.eye(5)), np.zeros(5))
    lam = pair.provenance["eigenvalues"]
    assert lam == pytest.approx([10.0, 10.0], abs=1e-8)
    assert pair.is_orthonormal()


def test_negative_dominant_eigenvalue_is_found_by_magnitude():
    A = np.diag([1.0, -6.0, 2.0])
    pair = top2_eigenvectors(quad_grad(A), np.zeros(3), tol=1e-12, max_iter=5000)
    assert pair.provenance["eigenvalues"][0] == pytest.approx(-6.0, abs=1e-8)


def test_rayleigh_history_nondecreasing_on_spd():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(8, 8))
    A = M @ M.T + np.eye(8)
    res = power_iteration(lambda v: A @ v, rng.normal(size=8), tol=1e-12, max_iter=5000)
    h = np.array(res.rayleigh)
    assert np.all(np.diff(h) >= -1e-10 * abs(h[-1]))
    assert res.eigenvalue == pytest.approx(np.linalg.eigvalsh(A)[-1], rel=1e-10)


def test_power_iteration_matches_dense_eigensolve():
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.normal(size=(12, 12)))
    ev = np.array([20.0, 11.0] + list(np.linspace(-4, 4, 10)))
    A = Q @ np.diag(ev) @ Q.T
    pair = top2_eigenvectors(quad_grad(A), rng.normal(size=12), tol=1e-12, max_iter=5000)
    w, V = np.linalg.eigh(A)
    assert pair.provenance["eigenvalues"] == pytest.approx([20.0, 11.0], abs=1e-7)
    assert abs(abs(pair.delta1 @ V[:, -1]) - 1.0) < 1e-6
    assert abs(abs(pair.delta2 @ V[:, -2]) - 1.0) < 1e-6


def test_trained_mlp_eigen_residuals(trained_mlp):
    spec, theta = trained_mlp
    pair = top2_eigenvectors(lambda th: mlp_grad(spec, th), theta, tol=1e-10, max_iter=20000)
    lam1 = abs(pair.provenance["eigenvalues"][0])
    assert lam1 > 0
    assert max(pair.provenance["residuals"]) < 1e-3 * lam1
    assert pair.is_orthonormal()


def test_non_convergence_reports_best_iterate():
    # nearly degenerate spectrum converges far slower than three steps allow
    A = np.diag([1.0, 0.99, 0.5])
    with pytest.raises(PowerIterationError) as info:
        power_iteration(lambda v: A @ v, np.array([1.0, 1.0, 1.0]), tol=1e-12, max_iter=3)
    err = info.value
    assert err.vector.shape == (3,) and 0.0 < err.residual < 1.0
    assert np.linalg.norm(A @ err.vector - err.eigenvalue * err.vector) == pytest.approx(err.residual)
    with pytest.raises(ArithmeticError):
        top2_eigenvectors(quad_grad(A), np.zeros(3), tol=1e-12, max_iter=3)


# ---- persistence and rescaling -------------------------------------------------------

def test_save_and_load_directions(tmp_path):
    pair = random_pair(17, 5)
    path = save_directions(tmp_path / "dirs.csv", pair)
    back = load_directions(path)
    assert np.array_equal(back.delta1, pair.delta1)
    assert np.array_equal(back.delta2, pair.delta2)
    assert back.provenance == pair.provenance


def test_per_layer_rescaling():
    spec = MlpSpec((2, 4, 1))
    theta = spec.init(0)
    pair = rescale_per_layer(random_pair(spec.dim, 0), theta, spec.layout)
    for _, _, sl in spec.layout.slices():
        assert np.linalg.norm(pair.delta1[sl]) == pytest.approx(np.linalg.norm(theta[sl]), rel=1e-12)
    assert pair.provenance["normalization"] == "per-layer"


def test_pair_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        DirectionPair(np.ones(3), np.ones(4))
