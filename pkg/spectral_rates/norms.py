"""Discrete and continuum error functionals.

* ``h1_disc``: squared discrete H¹ semi-norm of a graph function.
* ``hminus1_exact`` / ``multiscale_hminus1``: the dual norm and its
  cell-average upper estimate on a triadic cube hierarchy.
* ``error_functional``: the scale-invariant eigenpair error ℰ_l.
* ``mc_h1_error``: Monte Carlo L² and H¹ distances between smooth functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .errors import CapabilityError, DegenerateAlignmentError, DegenerateBasisError, DomainError
from .geometry import ContinuumEigenpair, FunctionWithGradient, ManifoldModel, PointCloud, sample_uniform
from .graph import WeightedGraph
from .linalg import l2_inner, l2_norm, pinv_quadform

logger = logging.getLogger(__name__)


def h1_disc(u, graph: WeightedGraph) -> float:
    """``1/(n² ε^{d+2}) Σ_{x,y} η(|x-y|/ε) (u(x) - u(y))²``."""
    u = np.asarray(u, dtype=float)
    w = graph.adjacency.matrix.tocoo()
    total = float(np.sum(w.data * (u[w.row] - u[w.col]) ** 2))
    return total / (graph.n**2 * graph.epsilon ** (graph.d + 2))


def h1_norm(u, graph: WeightedGraph) -> float:
    return math.sqrt(h1_disc(u, graph))


def hminus1_exact(h, op, sigma_eta: float) -> float:
    """Dual norm ``⟨h̃, (σ_η ℒ)⁺ h̃⟩^{1/2}`` for the rescaled Laplacian ``op``."""
    return math.sqrt(pinv_quadform(op, h, scale=sigma_eta))


def dual_pairing_violations(h, dual: float, graph: WeightedGraph, rng: np.random.Generator, count: int = 500) -> int:
    """How many random mean-zero ``g`` break ``⟨g, h⟩ ≤ dual · ‖g‖_{H̲¹}``.

    The ``count`` test functions are handled as one ``(n, count)`` block.
    """
    g = rng.standard_normal((graph.n, count))
    g -= g.mean(axis=0)
    w = graph.adjacency.matrix
    degree = np.asarray(w.sum(axis=1)).ravel()
    # Σ_{x,y} w (g(x) - g(y))² = 2 (Σ deg g² - Σ g·Wg)
    energy = 2.0 * (degree @ g**2 - np.sum(g * (w @ g), axis=0))
    energy /= graph.n**2 * graph.epsilon ** (graph.d + 2)
    pairing = g.T @ np.asarray(h, dtype=float) / graph.n
    bound = dual * np.sqrt(np.maximum(energy, 0.0))
    return int(np.count_nonzero(pairing > bound * (1 + 1e-8) + 1e-10))


class CubeHierarchy:
    """Nested triadic partitions of the torus from side ``3^{1-m}`` to 1.

    Level ``p`` has cells of side ``3^{p-m}`` centred on the lattice
    ``3^{p-m} Z^d``; ``m`` is the smallest integer with ``3^m ≥ ⌈c_ms / ε⌉``.
    """

    def __init__(self, cloud: PointCloud, epsilon: float, c_ms: float = 1.0):
        if not cloud.model.is_torus:
            raise CapabilityError("the cube hierarchy is defined on tori only")
        if epsilon <= 0:
            raise DomainError("epsilon must be positive")
        self.cloud = cloud
        self.epsilon = float(epsilon)
        self.d = cloud.model.intrinsic_dim
        target = math.ceil(c_ms / epsilon)
        m = 1
        while 3**m < target:
            m += 1
        self.m = m
        self._cells = {p: self._assign(p) for p in self.levels}

    @property
    def levels(self) -> range:
        return range(1, self.m + 1)

    def side(self, p: int) -> float:
        return 3.0 ** (p - self.m)

    def cells_per_axis(self, p: int) -> int:
        return 3 ** (self.m - p)

    def n_cells(self, p: int) -> int:
        return self.cells_per_axis(p) ** self.d

    def _assign(self, p: int) -> np.ndarray:
        per_axis = self.cells_per_axis(p)
        idx = np.floor(self.cloud.points / self.side(p) + 0.5).astype(np.int64) % per_axis
        return np.ravel_multi_index(tuple(idx.T), (per_axis,) * self.d)

    def cell_of(self, p: int) -> np.ndarray:
        """Flat cell index of every sample at level ``p``."""
        return self._cells[p]

    def members(self, p: int, cell: int) -> np.ndarray:
        return np.flatnonzero(self._cells[p] == cell)

    def cell_means(self, h, p: int) -> np.ndarray:
        """Average of ``h`` over each cell; empty cells give 0."""
        h = np.asarray(h, dtype=float)
        cells = self._cells[p]
        n_cells = self.n_cells(p)
        sums = np.bincount(cells, weights=h, minlength=n_cells)
        counts = np.bincount(cells, minlength=n_cells)
        return np.divide(sums, counts, out=np.zeros(n_cells), where=counts > 0)


def multiscale_hminus1(h, cloud: PointCloud, epsilon: float, c_ms: float = 1.0, hierarchy=None) -> float:
    """``ε ‖h‖ + Σ_p 3^{p-m} (mean over level-p cells of the squared cell average)^{1/2}``."""
    hierarchy = hierarchy or CubeHierarchy(cloud, epsilon, c_ms)
    h = np.asarray(h, dtype=float)
    total = epsilon * l2_norm(h)
    for p in hierarchy.levels:
        means = hierarchy.cell_means(h, p)
        total += hierarchy.side(p) * math.sqrt(float(np.mean(means**2)))
    return total


@dataclass(frozen=True)
class ErrorRecord:
    lambda_rel_err: float
    l2_err: float
    h1_err: float
    E_l: float
    n: int = 0
    epsilon: float = 0.0
    seed: int = 0
    l: int = 0
    manifold: str = ""
    density: str = ""
    kernel: str = ""
    coefficients: tuple = field(default=(), repr=False)

    def __post_init__(self):
        for name in ("lambda_rel_err", "l2_err", "h1_err", "E_l"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be finite and nonnegative, got {value}")

    def as_row(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "coefficients"}


def _restricted_basis(level: list[ContinuumEigenpair], cloud: PointCloud) -> np.ndarray:
    return np.column_stack([pair.eval(cloud.points) for pair in level])


def align(phi, level: list[ContinuumEigenpair], cloud: PointCloud) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm target in the exact eigenspace closest to ``phi``.

    Returns the restricted target values and the coefficient vector.
    """
    phi = np.asarray(phi, dtype=float)
    basis = _restricted_basis(level, cloud)
    coeffs, *_ = np.linalg.lstsq(basis, phi, rcond=None)
    projection = basis @ coeffs
    if l2_norm(projection) <= 1e-8 * max(l2_norm(phi), 1e-300) or not np.any(coeffs):
        raise DegenerateAlignmentError("eigenvector is orthogonal to the exact eigenspace")
    coeffs = coeffs / np.linalg.norm(coeffs)
    return basis @ coeffs, coeffs


def error_functional(
    lambda_nl: float,
    phi_nl,
    exact: list[ContinuumEigenpair],
    gamma_l: float,
    graph: WeightedGraph,
    cloud: PointCloud,
    **metadata,
) -> ErrorRecord:
    """ℰ_l = |λ_n - λ|/λ + (γ/λ)‖φ - f‖ + (γ/√λ)‖φ - f‖_{H¹}."""
    lam = exact[0].lam
    if lam <= 0:
        raise DomainError("the error functional needs a positive eigenvalue (l >= 2)")
    target, coeffs = align(phi_nl, exact, cloud)
    diff = np.asarray(phi_nl, dtype=float) - target
    rel = abs(lambda_nl - lam) / lam
    l2_err = l2_norm(diff)
    h1_err = h1_norm(diff, graph)
    e_l = rel + gamma_l / lam * l2_err + gamma_l / math.sqrt(lam) * h1_err
    return ErrorRecord(
        lambda_rel_err=rel,
        l2_err=l2_err,
        h1_err=h1_err,
        E_l=e_l,
        n=graph.n,
        epsilon=graph.epsilon,
        coefficients=tuple(coeffs.tolist()),
        **metadata,
    )


class MonteCarloError(NamedTuple):
    """Squared distances ``∫(F-G)²`` and ``∫|∇F-∇G|²`` with standard errors."""

    l2_err: float
    h1_semi_err: float
    std_errors: tuple[float, float]


def mc_h1_error(
    F: FunctionWithGradient,
    G: FunctionWithGradient,
    model: ManifoldModel,
    n_mc: int,
    seed: int,
) -> MonteCarloError:
    x = sample_uniform(model, n_mc, seed).points
    value_sq = (F.eval(x) - G.eval(x)) ** 2
    grad_sq = np.sum((F.grad(x) - G.grad(x)) ** 2, axis=1)
    vol = model.volume
    se = (
        vol * float(np.std(value_sq, ddof=1)) / math.sqrt(n_mc),
        vol * float(np.std(grad_sq, ddof=1)) / math.sqrt(n_mc),
    )
    return MonteCarloError(vol * float(value_sq.mean()), vol * float(grad_sq.mean()), se)


def subspace_residual(phi, basis) -> float:
    """``‖φ - P φ‖`` where ``P`` projects onto the span of ``basis``."""
    phi = np.asarray(phi, dtype=float)
    if len(basis) == 0:
        raise DegenerateBasisError("empty basis")
    ortho: list[np.ndarray] = []
    for b in basis:
        v = np.asarray(b, dtype=float).copy()
        original = l2_norm(v)
        for q in ortho:
            v -= l2_inner(v, q) * q
        norm = l2_norm(v)
        if original == 0.0 or norm <= 1e-10 * original:
            raise DegenerateBasisError("restricted basis is numerically dependent")
        ortho.append(v / norm)
    residual = phi.copy()
    for q in ortho:
        residual -= l2_inner(residual, q) * q
    return l2_norm(residual)
