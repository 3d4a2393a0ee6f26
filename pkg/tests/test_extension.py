import numpy as np
import pytest

from spectral_rates.calibration import frozen_constant
from spectral_rates.errors import CoverageError
from spectral_rates.extension import (
    Extension,
    ExtensionKernel,
    extend,
    extend_grad,
    extend_many,
    extension_h1_error,
    gradient_energy,
    psi_eval,
)
from spectral_rates.geometry import PointCloud, eigenspace, exp_map, make_manifold, sample_uniform, tangent_project
from spectral_rates.graph import build_graph, default_epsilon, make_kernel
from spectral_rates.norms import h1_disc


def test_tent_psi_closed_form():
    ek = ExtensionKernel(make_kernel("tent"), 0.1)
    assert psi_eval(ek, 0.0) == pytest.approx(1 / 6)
    assert psi_eval(ek, 0.5) == pytest.approx(1 / 12)
    assert psi_eval(ek, 1.0) == 0.0
    assert psi_eval(ek, 1.5) == 0.0
    np.testing.assert_allclose(psi_eval(ek, np.array([0.0, 0.5, 2.0])), [1 / 6, 1 / 12, 0.0])
    assert ek.weight(0.05, 2) == pytest.approx(0.1**-2 / 12)


def test_smoothstep_psi_spline():
    ek = ExtensionKernel(make_kernel("smoothstep"), 0.1)
    assert psi_eval(ek, 0.0) == pytest.approx(0.15, rel=1e-10)
    assert psi_eval(ek, 0.5) == pytest.approx(0.059375, rel=1e-8)
    assert psi_eval(ek, 1.0) == 0.0


@pytest.mark.parametrize("name", ["tent", "smoothstep"])
def test_psi_prime_is_the_derivative(name):
    ek = ExtensionKernel(make_kernel(name), 0.1)
    t = np.linspace(0.05, 0.95, 19)
    step = 1e-6
    fd = (psi_eval(ek, t + step) - psi_eval(ek, t - step)) / (2 * step)
    np.testing.assert_allclose(fd, ek.psi_prime(t), atol=1e-7)


@pytest.fixture(scope="module")
def torus_cloud():
    return sample_uniform(make_manifold("torus", 2), 2000, seed=31)


def test_extension_reproduces_constants(torus_cloud):
    x = sample_uniform(torus_cloud.model, 200, seed=1).points
    values = extend(np.full(torus_cloud.n, 2.5), torus_cloud, 0.08, x)
    np.testing.assert_allclose(values, 2.5, rtol=1e-14)
    grads = extend_grad(np.ones(torus_cloud.n), torus_cloud, 0.08, x)
    np.testing.assert_array_equal(grads, 0.0)


def test_single_sample_average():
    cloud = PointCloud(make_manifold("torus", 1), np.array([[0.4]]))
    assert extend(np.array([7.0]), cloud, 0.1, np.array([0.45])) == pytest.approx(7.0)
    with pytest.raises(CoverageError):
        extend(np.array([7.0]), cloud, 0.1, np.array([0.9]))


def test_affine_function_is_averaged_locally():
    cloud = sample_uniform(make_manifold("torus", 1), 5000, seed=4)
    r = 0.01
    x = np.linspace(0.3, 0.7, 41)[:, None]
    values = extend(cloud.points[:, 0], cloud, r, x)
    assert np.all(np.abs(values - x[:, 0]) <= r)


def test_extension_is_linear(torus_cloud):
    rng = np.random.default_rng(2)
    u, v = rng.standard_normal((2, torus_cloud.n))
    x = sample_uniform(torus_cloud.model, 100, seed=3).points
    lhs = extend(2.0 * u - 3.0 * v, torus_cloud, 0.08, x)
    rhs = 2.0 * extend(u, torus_cloud, 0.08, x) - 3.0 * extend(v, torus_cloud, 0.08, x)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_gradient_matches_finite_differences(torus_cloud):
    kernel = make_kernel("smoothstep")
    ext = Extension(torus_cloud, 0.1, kernel)
    u = np.random.default_rng(5).standard_normal(torus_cloud.n)
    x = np.array([[0.3, 0.6], [0.55, 0.12], [0.81, 0.9]])
    _, grads, covered = ext.evaluate(u, x)
    assert covered.all()
    step = 1e-5
    for axis in range(2):
        shift = np.zeros(2)
        shift[axis] = step
        plus, _, _ = ext.evaluate(u, x + shift, gradient=False)
        minus, _, _ = ext.evaluate(u, x - shift, gradient=False)
        fd = (plus - minus) / (2 * step)
        np.testing.assert_allclose(fd, grads[:, axis], rtol=1e-5, atol=1e-5 * np.abs(grads).max())


def test_sphere_gradient_is_tangent_and_matches_finite_differences():
    sphere = make_manifold("sphere2")
    cloud = sample_uniform(sphere, 3000, seed=6)
    u = cloud.points[:, 2] + 0.1 * np.random.default_rng(6).standard_normal(cloud.n)
    x = sample_uniform(sphere, 5, seed=7).points
    kernel = make_kernel("smoothstep")
    values, grads, covered = extend_many(u, cloud, 0.3, x, kernel)
    assert covered.all()
    np.testing.assert_allclose(np.sum(grads * x, axis=1), 0.0, atol=1e-12 * np.abs(grads).max())
    rng = np.random.default_rng(8)
    step = 1e-5
    for point, g in zip(x, grads):
        v = tangent_project(sphere, point, rng.standard_normal(3))
        v /= np.linalg.norm(v)
        plus = extend(u, cloud, 0.3, exp_map(sphere, point, step * v), kernel)
        minus = extend(u, cloud, 0.3, exp_map(sphere, point, -step * v), kernel)
        assert (plus - minus) / (2 * step) == pytest.approx(g @ v, rel=1e-5, abs=1e-5 * np.abs(grads).max())


def test_extension_error_of_constants():
    cloud = sample_uniform(make_manifold("torus", 2), 1000, seed=9)
    level, _ = eigenspace(cloud.model, 1)
    result = extension_h1_error(np.ones(cloud.n), level, cloud, 0.14, n_mc=5000, seed=1)
    assert result.l2_err == pytest.approx(0.0, abs=1e-12)
    assert result.h1_err == pytest.approx(0.0, abs=1e-12)
    assert not result.flagged


def test_extension_error_decreases_with_n():
    model = make_manifold("torus", 2)
    level, _ = eigenspace(model, 2)
    errors = []
    for n in (1000, 8000):
        cloud = sample_uniform(model, n, seed=10)
        phi = level[0].eval(cloud.points)
        result = extension_h1_error(phi, level, cloud, 0.14, n_mc=20_000, seed=2)
        assert not result.flagged
        errors.append(result)
    assert errors[1].h1_err < errors[0].h1_err
    assert errors[1].l2_err < errors[0].l2_err


def test_sparse_clouds_are_flagged(caplog):
    model = make_manifold("torus", 2)
    level, _ = eigenspace(model, 2)
    cloud = sample_uniform(model, 50, seed=11)
    phi = level[0].eval(cloud.points)
    result = extension_h1_error(phi, level, cloud, 0.02, n_mc=20_000, seed=3)
    assert result.flagged
    assert result.coverage_miss_frac > 0.5
    assert "uncovered" in caplog.text

    tiny = sample_uniform(model, 3, seed=12)
    with pytest.raises(CoverageError):
        extension_h1_error(level[0].eval(tiny.points), level, tiny, 0.02, n_mc=100, seed=4, r=1e-4)


def test_gradient_energy_is_bounded_by_discrete_h1():
    model = make_manifold("torus", 2)
    n = 4000
    cloud = sample_uniform(model, n, seed=13)
    eps = default_epsilon(n, 2, 0.5)
    graph = build_graph(cloud, eps, make_kernel("tent"))
    bound = frozen_constant("C_ext")
    rng = np.random.default_rng(14)
    smooth = [mode.eval(cloud.points) for mode in eigenspace(model, 2)[0]]
    for i in range(10):
        u = smooth[i % 4] + (0.5 if i >= 4 else 0.0) * rng.standard_normal(n)
        energy = gradient_energy(u, cloud, eps / 2, n_mc=20_000, seed=i)
        assert energy <= bound * h1_disc(u, graph)
