"""Finite differences for ``-div(ρ² ∇f) = λ ρ f`` on periodic grids (d = 1, 2).

Used for reference eigenpairs under non-uniform densities, for the kernel
density plug-in estimator and for the separation of bump densities.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .density import DensityModel, periodic_grid_points, uniform_density
from .errors import CapabilityError, ConfigurationError, DegenerateAlignmentError
from .geometry import PointCloud, eigenspace, make_manifold
from .linalg import EigPair, lanczos_smallest

logger = logging.getLogger(__name__)

KDE_FLOOR = 1e-6
KDE_CHUNK = 2**22


@dataclass(frozen=True)
class PeriodicGrid:
    d: int
    N: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise CapabilityError(f"periodic grids are implemented for d in (1, 2), got {self.d}")
        if self.N < 16:
            raise ConfigurationError(f"grid resolution must be at least 16, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    def points(self) -> np.ndarray:
        """Node coordinates, row-major."""
        return periodic_grid_points(self.d, self.N)

    def integrate(self, values) -> float:
        return float(np.sum(values)) * self.h**self.d


def grid_gradient(values, grid: PeriodicGrid) -> np.ndarray:
    """Forward differences per axis, shape ``(N^d, d)``."""
    f = np.asarray(values, dtype=float).reshape(grid.shape)
    parts = [((np.roll(f, -1, axis=a) - f) / grid.h).ravel() for a in range(grid.d)]
    return np.column_stack(parts)


@dataclass(frozen=True)
class ReducedOperator:
    """``M^{-1/2} K M^{-1/2}`` as a symmetric sparse matrix."""

    matrix: sparse.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def dtype(self):
        return self.matrix.dtype

    def matvec(self, v):
        return self.matrix @ v

    def norm_estimate(self) -> float:
        return float(abs(self.matrix).sum(axis=1).max())


class GridOperator:
    """Flux-form stiffness ``K`` and lumped mass ``M = diag(ρ_i h^d)``.

    Face weights are ``((ρ_i + ρ_j) / 2)²`` between neighbouring nodes.
    """

    def __init__(self, grid: PeriodicGrid, rho):
        rho = np.asarray(rho, dtype=float).ravel()
        if rho.shape != (grid.size,):
            raise ConfigurationError(f"density has {rho.size} nodes, grid has {grid.size}")
        if np.any(rho <= 0):
            raise ConfigurationError("grid density must be positive")
        self.grid = grid
        self.rho = rho
        index = np.arange(grid.size).reshape(grid.shape)
        rows, cols, weights = [], [], []
        for axis in range(grid.d):
            neighbour = np.roll(index, -1, axis=axis).ravel()
            rows.append(index.ravel())
            cols.append(neighbour)
            weights.append(((rho + rho[neighbour]) / 2.0) ** 2)
        faces = sparse.coo_matrix(
            (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
            shape=(grid.size, grid.size),
        ).tocsr()
        faces = faces + faces.T
        degree = np.asarray(faces.sum(axis=1)).ravel()
        self.K = (grid.h ** (grid.d - 2) * (sparse.diags(degree) - faces)).tocsr()
        self.mass = rho * grid.h**grid.d

    def reduced(self) -> ReducedOperator:
        inv_sqrt = sparse.diags(1.0 / np.sqrt(self.mass))
        return ReducedOperator((inv_sqrt @ self.K @ inv_sqrt).tocsr())


def grid_operator(grid: PeriodicGrid, rho) -> GridOperator:
    """Operator for a density model (evaluated at the nodes) or raw node values."""
    if isinstance(rho, DensityModel):
        if not rho.model.is_torus or rho.model.intrinsic_dim != grid.d:
            raise ConfigurationError("density and grid live on different tori")
        rho = rho.evaluate(grid.points())
    return GridOperator(grid, rho)


def grid_eigenpairs(op: GridOperator, k: int, seed: int = 0, tol: float = 1e-10) -> list[EigPair]:
    """Smallest ``k`` pairs of ``K f = λ M f`` with ``Σ f_i² ρ_i h^d = 1``."""
    if k > 30:
        raise ConfigurationError("grid eigenpairs are limited to k <= 30")
    n = op.grid.size
    pairs = lanczos_smallest(op.reduced(), k, tol=tol, max_iter=30 * n, seed=seed, krylov_dim=min(n, 2000))
    scale = 1.0 / np.sqrt(op.mass)
    out = []
    for p in pairs:
        f = scale * p.vector / math.sqrt(n)
        out.append(EigPair(value=p.value, vector=f, residual=p.residual))
    return out


# -- kernel density plug-in ------------------------------------------------------


def kde_evaluate(samples, r: float, x) -> np.ndarray:
    """Wrapped-Gaussian KDE on the unit torus, summed over ``{-1, 0, 1}^d`` images."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = samples.shape[1]
    norm = (2.0 * math.pi * r * r) ** (-d / 2.0)
    shifts = np.array(list(np.ndindex(*(3,) * d))) - 1.0
    out = np.zeros(len(x))
    step = max(1, KDE_CHUNK // max(len(x) * len(shifts), 1))
    for lo in range(0, len(samples), step):
        diff = x[:, None, :] - samples[None, lo : lo + step, :]
        for s in shifts:
            sq = np.sum((diff + s) ** 2, axis=-1)
            out += np.exp(-sq / (2.0 * r * r)).sum(axis=1)
    return norm * out / len(samples)


def kde_torus(samples: PointCloud, r: float, grid: PeriodicGrid) -> np.ndarray:
    """KDE on the grid nodes, floored at 1e-6 and renormalised to unit mass."""
    if not samples.model.is_torus or samples.model.intrinsic_dim != grid.d:
        raise CapabilityError("the plug-in estimator needs samples on the grid's torus")
    if not 0.0 < r < 0.25:
        raise ConfigurationError(f"bandwidth must lie in (0, 1/4), got {r}")
    rho_hat = np.maximum(kde_evaluate(samples.points, r, grid.points()), KDE_FLOOR)
    return rho_hat / grid.integrate(rho_hat)


class PluginEstimate(NamedTuple):
    lam: float
    f: np.ndarray
    bandwidth: float
    rho_hat: np.ndarray
    pairs: list


def plugin_bandwidth(n: int, d: int, c_bw: float) -> float:
    return c_bw * n ** (-1.0 / (d + 4))


def plugin_estimate(samples: PointCloud, l: int, grid: PeriodicGrid, c_bw: float, seed: int = 0) -> PluginEstimate:
    """Level-``l`` eigenpair of the operator built from the KDE of ``samples``."""
    if l < 1:
        raise ConfigurationError("eigenpair index is 1-based")
    r = plugin_bandwidth(samples.n, grid.d, c_bw)
    rho_hat = kde_torus(samples, r, grid)
    level, start = eigenspace(samples.model, l)
    k = max(l, start - 1 + len(level))
    pairs = grid_eigenpairs(GridOperator(grid, rho_hat), k, seed=seed)
    chosen = pairs[l - 1]
    logger.debug("plug-in: n=%d r=%.4g lambda_hat=%.6g", samples.n, r, chosen.value)
    return PluginEstimate(chosen.value, chosen.vector, r, rho_hat, pairs)


# -- eigenpair distances -------------------------------------------------------


class EigenpairMetric(NamedTuple):
    metric: float
    lambda_term: float
    l2_term: float
    h1_term: float
    l2_metric: float


def level_block(pairs: list[EigPair], grid: PeriodicGrid, l: int) -> list[EigPair]:
    """Pairs at the indices of the level containing the ``l``-th torus eigenvalue."""
    level, start = eigenspace(make_manifold("torus", grid.d), l)
    block = pairs[start - 1 : start - 1 + len(level)]
    if len(block) < len(level):
        raise ConfigurationError(f"need {start - 1 + len(level)} eigenpairs for level {l}, got {len(pairs)}")
    return block


def eigenpair_metric(lam_hat: float, f_hat, lam_ref: float, block: list[EigPair], grid: PeriodicGrid) -> EigenpairMetric:
    """``|λ̂ - λ| + ‖f̂ - f‖ + ‖∇f̂ - ∇f‖`` with ``f`` aligned inside ``block``."""
    f_hat = np.asarray(f_hat, dtype=float)
    basis = np.column_stack([p.vector for p in block])
    coeffs, *_ = np.linalg.lstsq(basis, f_hat, rcond=None)
    if np.linalg.norm(coeffs) <= 1e-12:
        raise DegenerateAlignmentError("estimate is orthogonal to the reference eigenspace")
    target = basis @ (coeffs / np.linalg.norm(coeffs))
    diff = f_hat - target
    l2 = math.sqrt(grid.integrate(diff**2))
    h1 = math.sqrt(grid.integrate(np.sum(grid_gradient(diff, grid) ** 2, axis=1)))
    lam_term = abs(lam_hat - lam_ref)
    return EigenpairMetric(lam_term + l2 + h1, lam_term, l2, h1, lam_term + l2)


def eigenpair_separation(
    rho1: DensityModel, rho2: DensityModel, l: int, grid: PeriodicGrid, seed: int = 0
) -> EigenpairMetric:
    """Distance between the level-``l`` eigenpairs of two densities on the grid."""
    if rho1.model != rho2.model:
        raise ConfigurationError("densities live on different manifolds")
    level, start = eigenspace(rho1.model, l)
    k = max(l, start - 1 + len(level))
    pairs1 = grid_eigenpairs(grid_operator(grid, rho1), k, seed=seed)
    pairs2 = grid_eigenpairs(grid_operator(grid, rho2), k, seed=seed)
    block = level_block(pairs2, grid, l)
    return eigenpair_metric(pairs1[l - 1].value, pairs1[l - 1].vector, pairs2[l - 1].value, block, grid)


class PerturbationRatio(NamedTuple):
    m: int
    density_l2: float
    eigenvalue_ratio: float
    gradient_ratio: float


def perturbation_ratios(densities: list[DensityModel], l: int, grid: PeriodicGrid, seed: int = 0) -> list[PerturbationRatio]:
    """``|λ_l(ρ) - λ_l(1)| / ‖ρ - 1‖`` and the eigenfunction gradient analogue."""
    if not densities:
        return []
    base = uniform_density(densities[0].model)
    level, start = eigenspace(base.model, l)
    k = max(l, start - 1 + len(level))
    ref = grid_eigenpairs(grid_operator(grid, base), k, seed=seed)
    block = level_block(ref, grid, l)
    out = []
    for rho in densities:
        pairs = grid_eigenpairs(grid_operator(grid, rho), k, seed=seed)
        dist = eigenpair_metric(pairs[l - 1].value, pairs[l - 1].vector, ref[l - 1].value, block, grid)
        gap = math.sqrt(grid.integrate((rho.evaluate(grid.points()) - 1.0) ** 2))
        out.append(PerturbationRatio(rho.m, gap, dist.lambda_term / gap, dist.h1_term / gap))
    return out
