import numpy as np
import pytest

from spectral_rates.errors import ConfigurationError, ConvergenceError, DisconnectedGraphError
from spectral_rates.geometry import PointCloud, make_manifold, sample_uniform
from spectral_rates.graph import build_graph, graph_laplacian, kernel_moments, make_kernel
from spectral_rates.linalg import (
    cg_solve_meanzero,
    dense_smallest,
    l2_inner,
    l2_norm,
    lanczos_smallest,
    pinv_quadform,
)
from spectral_rates.norms import h1_disc


@pytest.fixture(scope="module")
def graph200():
    cloud = sample_uniform(make_manifold("torus", 2), 200, seed=12)
    return build_graph(cloud, 0.3, make_kernel("tent"))


@pytest.fixture(scope="module")
def lap200(graph200):
    return graph_laplacian(graph200)[1]


def _dense_pinv(dense):
    values, vectors = np.linalg.eigh(dense)
    keep = values > 1e-8 * values.max()
    return (vectors[:, keep] / values[keep]) @ vectors[:, keep].T


def test_lowest_pair_is_constant(small_laplacians):
    _, lap = small_laplacians
    (pair,) = lanczos_smallest(lap, 1, tol=1e-11, seed=0)
    assert abs(pair.value) <= 1e-10
    np.testing.assert_allclose(pair.vector, 1.0, atol=1e-8)


def test_diagonal_operator():
    pairs = lanczos_smallest(np.diag([1.0, 2.0, 3.0, 4.0]), 2)
    np.testing.assert_allclose([p.value for p in pairs], [1.0, 2.0], atol=1e-12)
    assert l2_norm(pairs[0].vector) == pytest.approx(1.0)


def test_matches_dense_oracle(lap200):
    fast = lanczos_smallest(lap200, 6, tol=1e-10, seed=3)
    slow = dense_smallest(lap200, 6)
    np.testing.assert_allclose([p.value for p in fast], [p.value for p in slow], atol=1e-8)
    assert all(p.residual <= 1e-10 * lap200.norm_estimate() * 10 for p in fast)


def test_eigenvectors_are_orthonormal(lap200):
    pairs = lanczos_smallest(lap200, 8, seed=1)
    vectors = np.column_stack([p.vector for p in pairs])
    gram = vectors.T @ vectors / vectors.shape[0]
    np.testing.assert_allclose(gram, np.eye(8), atol=1e-8)
    values = [p.value for p in pairs]
    assert values == sorted(values)


def test_lanczos_is_deterministic(lap200):
    a = lanczos_smallest(lap200, 5, seed=9)
    b = lanczos_smallest(lap200, 5, seed=9)
    assert [p.value for p in a] == [p.value for p in b]


def test_lanczos_errors(lap200):
    with pytest.raises(ConfigurationError):
        lanczos_smallest(lap200, 0)
    with pytest.raises(ConfigurationError):
        lanczos_smallest(lap200, 201)
    with pytest.raises(ConvergenceError) as info:
        lanczos_smallest(lap200, 5, max_iter=5)
    assert info.value.residuals is not None

    cloud = PointCloud(make_manifold("torus", 1), np.array([[0.1], [0.6]]))
    _, lap = graph_laplacian(build_graph(cloud, 0.2, make_kernel("tent")))
    with pytest.raises(DisconnectedGraphError):
        lanczos_smallest(lap, 1)


def test_cg_kills_constants(lap200):
    np.testing.assert_array_equal(cg_solve_meanzero(lap200, np.full(200, 3.5)), 0.0)


def test_cg_recovers_known_solution(lap200):
    v = np.random.default_rng(5).standard_normal(200)
    v -= v.mean()
    u = cg_solve_meanzero(lap200, lap200 @ v)
    assert abs(u.mean()) < 1e-12
    assert l2_norm(u - v) <= 1e-7 * l2_norm(v)


def test_cg_matches_dense_pseudoinverse(lap200):
    rhs = np.random.default_rng(6).standard_normal(200)
    history = []
    u = cg_solve_meanzero(lap200, rhs, history=history)
    expected = _dense_pinv(lap200.to_dense()) @ (rhs - rhs.mean())
    np.testing.assert_allclose(u, expected, atol=1e-6 * np.abs(expected).max())
    assert history[-1] <= 1e-10
    assert np.all(np.diff(history) <= 1e-9)


def test_cg_reports_non_convergence(lap200):
    rhs = np.random.default_rng(6).standard_normal(200)
    with pytest.raises(ConvergenceError):
        cg_solve_meanzero(lap200, rhs, max_iter=2)


def test_pinv_quadform(graph200, lap200):
    _, sigma = kernel_moments(graph200.kernel, graph200.d)
    assert pinv_quadform(lap200, np.full(200, 2.0)) == 0.0

    second = lanczos_smallest(lap200, 2, tol=1e-12, seed=0)[1]
    h = 3.0 * second.vector
    expected = l2_inner(h, h) / (sigma * second.value)
    assert pinv_quadform(lap200, h, scale=sigma) == pytest.approx(expected, rel=1e-8)


def test_pinv_quadform_dominates_every_ratio(graph200, lap200):
    _, sigma = kernel_moments(graph200.kernel, graph200.d)
    rng = np.random.default_rng(7)
    h = rng.standard_normal(200)
    quad = pinv_quadform(lap200, h, scale=sigma)
    for _ in range(500):
        g = rng.standard_normal(200)
        g -= g.mean()
        ratio = l2_inner(g, h) ** 2 / h1_disc(g, graph200)
        assert ratio <= quad * (1 + 1e-8) + 1e-10
