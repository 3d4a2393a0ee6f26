import math

import numpy as np
import pytest

from spectral_rates.calibration import frozen_constant
from spectral_rates.density import bump_density, uniform_density
from spectral_rates.errors import CapabilityError, ConfigurationError
from spectral_rates.geometry import make_manifold, sample_uniform
from spectral_rates.pde import (
    GridOperator,
    PeriodicGrid,
    eigenpair_separation,
    grid_eigenpairs,
    grid_operator,
    kde_evaluate,
    kde_torus,
    perturbation_ratios,
    plugin_estimate,
)
from spectral_rates.report import fit_loglog

FOUR_PI_SQ = 4 * math.pi**2


def _uniform_op(d, n):
    grid = PeriodicGrid(d, n)
    return grid_operator(grid, uniform_density(make_manifold("torus", d)))


def test_grid_validation():
    with pytest.raises(CapabilityError):
        PeriodicGrid(3, 32)
    with pytest.raises(ConfigurationError):
        PeriodicGrid(1, 8)
    with pytest.raises(ConfigurationError):
        GridOperator(PeriodicGrid(1, 16), -np.ones(16))
    with pytest.raises(ConfigurationError):
        grid_eigenpairs(_uniform_op(1, 64), 31)


def test_stiffness_and_mass():
    grid = PeriodicGrid(2, 16)
    rho = bump_density(2, [1, -1, -1, 1], d=2)
    op = grid_operator(grid, rho)
    dense = op.K.toarray()
    np.testing.assert_array_equal(dense, dense.T)
    scale = np.abs(dense).max()
    np.testing.assert_allclose(dense @ np.ones(grid.size), 0.0, atol=1e-12 * scale)
    assert np.linalg.eigvalsh(dense).min() >= -1e-10 * scale
    assert np.all(op.mass > 0)
    assert op.mass.sum() == pytest.approx(1.0, rel=1e-6)


def test_second_eigenvalue_in_one_dimension():
    op = _uniform_op(1, 512)
    pairs = grid_eigenpairs(op, 3)
    h = 1 / 512
    assert abs(pairs[1].value - FOUR_PI_SQ) / FOUR_PI_SQ <= 2 * (math.pi * h) ** 2 / 3
    assert pairs[2].value == pytest.approx(pairs[1].value, rel=1e-8)


def test_lowest_pair_is_normalised_constant():
    op = _uniform_op(1, 128)
    (pair,) = grid_eigenpairs(op, 1)
    assert abs(pair.value) < 1e-8
    np.testing.assert_allclose(pair.vector, 1.0, atol=1e-6)
    assert np.sum(pair.vector**2 * op.mass) == pytest.approx(1.0, rel=1e-12)


def test_second_order_refinement():
    errors = [abs(grid_eigenpairs(_uniform_op(1, n), 2)[1].value - FOUR_PI_SQ) for n in (64, 128)]
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("n", [64, pytest.param(128, marks=pytest.mark.slow)])
def test_fourfold_level_in_two_dimensions(n):
    values = [p.value for p in grid_eigenpairs(_uniform_op(2, n), 6)]
    level = values[1:5]
    assert max(level) / min(level) - 1 <= 1e-6
    assert values[5] > 1.5 * values[4]


def test_wrapped_kde_single_sample():
    expected = (2 * math.pi * 0.01) ** -0.5 * (1 + 2 * math.exp(-1 / (2 * 0.01)))
    assert kde_evaluate(np.array([[0.0]]), 0.1, np.array([[0.0]]))[0] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(3.9894, abs=1e-4)


def test_kde_on_grid():
    grid = PeriodicGrid(1, 256)
    torus1 = make_manifold("torus", 1)
    small = kde_torus(sample_uniform(torus1, 200, seed=1), 0.1, grid)
    large = kde_torus(sample_uniform(torus1, 5000, seed=1), 0.1, grid)
    assert grid.integrate(large) == pytest.approx(1.0, abs=1e-8)
    assert np.abs(large - 1).max() < np.abs(small - 1).max()
    with pytest.raises(ConfigurationError):
        kde_torus(sample_uniform(torus1, 10, seed=1), 0.3, grid)
    with pytest.raises(CapabilityError):
        kde_torus(sample_uniform(make_manifold("sphere2"), 10, seed=1), 0.1, grid)


def test_plugin_estimate():
    grid = PeriodicGrid(1, 256)
    samples = sample_uniform(make_manifold("torus", 1), 10_000, seed=17)
    estimate = plugin_estimate(samples, 2, grid, c_bw=0.5)
    assert estimate.lam == pytest.approx(FOUR_PI_SQ, rel=0.15)
    assert estimate.bandwidth == pytest.approx(0.5 * 10_000 ** (-1 / 5))
    again = plugin_estimate(samples, 2, grid, c_bw=0.5)
    assert again.lam == estimate.lam
    np.testing.assert_array_equal(again.f, estimate.f)

    first = plugin_estimate(samples, 1, grid, c_bw=0.5)
    assert abs(first.lam) < 1e-6
    np.testing.assert_allclose(first.f, 1.0, atol=0.05)


def test_separation_of_identical_densities():
    grid = PeriodicGrid(1, 256)
    rho = bump_density(4, [1, -1, 1, 1])
    metric = eigenpair_separation(rho, rho, 2, grid)
    assert metric.metric == pytest.approx(0.0, abs=1e-8)


@pytest.mark.slow
def test_separation_decays_like_m_to_the_minus_two():
    grid = PeriodicGrid(1, 1024)
    ms = [4, 8, 16]
    seps = [
        eigenpair_separation(bump_density(m, np.ones(m, dtype=int)), bump_density(m, -np.ones(m, dtype=int)), 2, grid).metric
        for m in ms
    ]
    assert fit_loglog(ms, seps).slope == pytest.approx(-2.0, abs=0.7)


def test_perturbation_ratios_respect_frozen_constants():
    grid = PeriodicGrid(1, 512)
    densities = [bump_density(m, np.ones(m, dtype=int)) for m in (4, 8)]
    ratios = perturbation_ratios(densities, 2, grid)
    assert [r.m for r in ratios] == [4, 8]
    for r in ratios:
        assert r.density_l2 > 0
        assert r.eigenvalue_ratio <= frozen_constant("C_pert")
        assert r.gradient_ratio <= frozen_constant("C_pert_grad")
    assert perturbation_ratios([], 2, grid) == []
