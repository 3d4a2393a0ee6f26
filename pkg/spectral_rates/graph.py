"""Kernels, ε-proximity graphs and graph Laplacians.

The graph Laplacian of a cloud of ``n`` points at length scale ``ε`` is

    Δ_n u(x_i) = 1/(n ε^{d+2}) Σ_j w_ij (u(x_i) - u(x_j)),   w_ij = η(|x_i - x_j| / ε),

and its rescaled version ``ℒ = (2/σ_η) Δ_n`` converges to the weighted
Laplacian ``Δ_ρ``. Neighbours are found with a cell list of side at least the
search radius, so each pair of points is examined at most once.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, sparse
from scipy.sparse import csgraph
from scipy.special import gamma

from .errors import ConfigurationError
from .geometry import ManifoldModel, PointCloud, ambient_distance, displacement

logger = logging.getLogger(__name__)


# -- kernels -------------------------------------------------------------------


def _tent(t):
    return np.where(t <= 1.0, 1.0 - t, 0.0)


def _smoothstep(t):
    return np.where(t <= 1.0, 1.0 - 3.0 * t**2 + 2.0 * t**3, 0.0)


PROFILES = {"tent": _tent, "smoothstep": _smoothstep}


@dataclass(frozen=True)
class Kernel:
    """Radial profile η supported on ``[0, 1]``, optionally rescaled by ``scale``."""

    name: str
    scale: float = 1.0

    def __post_init__(self):
        if self.name not in PROFILES:
            raise ConfigurationError(f"unknown kernel {self.name!r}; choose from {sorted(PROFILES)}")
        if self.scale <= 0:
            raise ConfigurationError("kernel scale must be positive")

    def profile(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.scale * PROFILES[self.name](np.maximum(t, 0.0))

    def moments(self, d: int) -> tuple[float, float]:
        return kernel_moments(self, d)


def make_kernel(name: str, scale: float = 1.0) -> Kernel:
    return Kernel(name=name.strip().lower(), scale=scale)


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere S^{d-1} in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


@lru_cache(maxsize=None)
def kernel_moments(kernel: Kernel, d: int) -> tuple[float, float]:
    """``(∫ η(|x|) dx, ∫ y₁² η(|y|) dy)`` over R^d by radial quadrature."""
    if d not in (1, 2, 3):
        raise ConfigurationError(f"kernel moments implemented for d in (1, 2, 3), got {d}")
    area = sphere_area(d)
    mass, _ = integrate.quad(lambda r: float(kernel.profile(r)) * r ** (d - 1), 0.0, 1.0, epsrel=1e-10, epsabs=0.0)
    second, _ = integrate.quad(lambda r: float(kernel.profile(r)) * r ** (d + 1), 0.0, 1.0, epsrel=1e-10, epsabs=0.0)
    # ∫ y₁² over the sphere of radius r is r² · area · r^{d-1} / d
    return area * mass, area * second / d


# -- neighbour search ------------------------------------------------------------


class CellList:
    """Bucket points into cubic cells of side at least ``radius``.

    Tori use the periodic unit box; the sphere uses the box ``[-1, 1]³``.
    """

    def __init__(self, model: ManifoldModel, points: np.ndarray, radius: float):
        self.model = model
        self.points = np.asarray(points, dtype=float)
        self.radius = float(radius)
        self.periodic = model.is_torus
        dim = model.ambient_dim
        if self.periodic:
            self.lo = np.zeros(dim)
            span = 1.0
        else:
            self.lo = np.full(dim, -1.0 - 1e-9)
            span = 2.0 + 2e-9
        self.span = span
        self.size = max(1, int(math.floor(span / self.radius)))
        self.shape = (self.size,) * dim
        coords = self._coords(self.points)
        self.keys = np.ravel_multi_index(tuple(coords.T), self.shape) if len(coords) else np.empty(0, dtype=np.int64)
        self.order = np.argsort(self.keys, kind="stable")
        sorted_keys = self.keys[self.order]
        self.occupied, starts = np.unique(sorted_keys, return_index=True)
        ends = np.append(starts[1:], len(sorted_keys))
        self._members = {int(k): self.order[s:e] for k, s, e in zip(self.occupied, starts, ends)}

    def _coords(self, points: np.ndarray) -> np.ndarray:
        scaled = (np.asarray(points, dtype=float) - self.lo) / self.span * self.size
        coords = np.floor(scaled).astype(np.int64)
        if self.periodic:
            return np.mod(coords, self.size)
        return np.clip(coords, 0, self.size - 1)

    def members(self, key: int) -> np.ndarray:
        return self._members.get(int(key), np.empty(0, dtype=np.int64))

    def neighbour_keys(self, key: int) -> list[int]:
        """Distinct cells within one step of ``key`` (wrapped or clipped)."""
        center = np.array(np.unravel_index(int(key), self.shape))
        found = set()
        for offset in itertools.product((-1, 0, 1), repeat=len(self.shape)):
            cell = center + np.array(offset)
            if self.periodic:
                cell = np.mod(cell, self.size)
            elif np.any(cell < 0) or np.any(cell >= self.size):
                continue
            found.add(int(np.ravel_multi_index(tuple(cell), self.shape)))
        return sorted(found)

    def self_pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All pairs ``i < j`` within ``radius``, each examined once."""
        rows, cols, dists = [], [], []
        for key in self.occupied:
            a = self.members(key)
            for other in self.neighbour_keys(key):
                if other < key:
                    continue
                if other == key:
                    ii, jj = np.triu_indices(len(a), k=1)
                    i, j = a[ii], a[jj]
                else:
                    b = self.members(other)
                    if len(b) == 0:
                        continue
                    i = np.repeat(a, len(b))
                    j = np.tile(b, len(a))
                lo, hi = np.minimum(i, j), np.maximum(i, j)
                dist = ambient_distance(self.model, self.points[lo], self.points[hi])
                keep = dist <= self.radius
                rows.append(lo[keep])
                cols.append(hi[keep])
                dists.append(dist[keep])
        if not rows:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty, np.empty(0)
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(dists)

    def cross_pairs(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pairs ``(query index, point index, distance)`` within ``radius``."""
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        qkeys = np.ravel_multi_index(tuple(self._coords(queries).T), self.shape)
        q_order = np.argsort(qkeys, kind="stable")
        q_unique, q_starts = np.unique(qkeys[q_order], return_index=True)
        q_ends = np.append(q_starts[1:], len(q_order))
        rows, cols, dists = [], [], []
        for key, s, e in zip(q_unique, q_starts, q_ends):
            qa = q_order[s:e]
            for other in self.neighbour_keys(key):
                b = self.members(other)
                if len(b) == 0:
                    continue
                i = np.repeat(qa, len(b))
                j = np.tile(b, len(qa))
                dist = ambient_distance(self.model, queries[i], self.points[j])
                keep = dist <= self.radius
                rows.append(i[keep])
                cols.append(j[keep])
                dists.append(dist[keep])
        if not rows:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty, np.empty(0)
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(dists)


# -- graphs ----------------------------------------------------------------------


@dataclass(frozen=True)
class SparseSymMatrix:
    """Symmetric CSR matrix; symmetry is checked exactly on construction."""

    matrix: sparse.csr_matrix

    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise ConfigurationError("matrix must be square")
        if (m != m.T).nnz:
            raise ConfigurationError("matrix is not exactly symmetric")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def symmetric(self) -> bool:
        return True

    def __matmul__(self, u):
        return self.matrix @ u


@dataclass(frozen=True)
class WeightedGraph:
    cloud: PointCloud
    epsilon: float
    kernel: Kernel
    adjacency: SparseSymMatrix
    n_components: int
    metric: str = field(default="wrap")

    @property
    def n(self) -> int:
        return self.cloud.n

    @property
    def d(self) -> int:
        return self.cloud.model.intrinsic_dim

    @property
    def edge_count(self) -> int:
        return self.adjacency.matrix.nnz // 2

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.edge_count / max(self.n, 1)

    @property
    def connected(self) -> bool:
        return self.n_components == 1

    def summary(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "edges": self.edge_count,
            "mean_degree": self.mean_degree,
            "components": self.n_components,
            "metric": self.metric,
        }


def _check_epsilon(model: ManifoldModel, epsilon: float) -> None:
    if not 0.0 < epsilon < model.max_epsilon:
        raise ConfigurationError(
            f"epsilon={epsilon} outside (0, {model.max_epsilon}) for {model.name}"
        )


def _assemble(cloud, epsilon, kernel, rows, cols, dists) -> WeightedGraph:
    weights = kernel.profile(dists / epsilon)
    keep = weights > 0.0
    rows, cols, weights = rows[keep], cols[keep], weights[keep]
    n = cloud.n
    upper = sparse.coo_matrix((weights, (rows, cols)), shape=(n, n))
    adjacency = (upper + upper.T).tocsr()
    adjacency.sort_indices()
    n_components, _ = csgraph.connected_components(adjacency, directed=False)
    graph = WeightedGraph(
        cloud=cloud,
        epsilon=float(epsilon),
        kernel=kernel,
        adjacency=SparseSymMatrix(adjacency),
        n_components=int(n_components),
        metric=cloud.model.metric,
    )
    logger.debug("graph: %s", graph.summary())
    return graph


def build_graph(cloud: PointCloud, epsilon: float, kernel: Kernel) -> WeightedGraph:
    _check_epsilon(cloud.model, epsilon)
    rows, cols, dists = CellList(cloud.model, cloud.points, epsilon).self_pairs()
    return _assemble(cloud, epsilon, kernel, rows, cols, dists)


def brute_force_graph(cloud: PointCloud, epsilon: float, kernel: Kernel) -> WeightedGraph:
    """O(n²) construction, used as an oracle for :func:`build_graph`."""
    _check_epsilon(cloud.model, epsilon)
    rows, cols = np.triu_indices(cloud.n, k=1)
    dists = ambient_distance(cloud.model, cloud.points[rows], cloud.points[cols])
    keep = dists <= epsilon
    return _assemble(cloud, epsilon, kernel, rows[keep], cols[keep], dists[keep])


# -- Laplacians ----------------------------------------------------------------------


@dataclass(frozen=True)
class LaplacianOperator:
    """``scale · (D - W)`` applied matrix-free; ``D`` is the row sum of ``W``."""

    adjacency: SparseSymMatrix
    degree: np.ndarray
    scale: float
    n_components: int = 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.adjacency.n, self.adjacency.n)

    @property
    def dtype(self):
        return np.dtype(float)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 2:
            return self.scale * (self.degree[:, None] * u - self.adjacency.matrix @ u)
        return self.scale * (self.degree * u - self.adjacency.matrix @ u)

    def __matmul__(self, u):
        return self.matvec(u)

    def rescaled(self, factor: float) -> "LaplacianOperator":
        return LaplacianOperator(self.adjacency, self.degree, self.scale * factor, self.n_components)

    def to_dense(self) -> np.ndarray:
        return self.matvec(np.eye(self.shape[0]))

    def norm_estimate(self) -> float:
        """Gershgorin bound ``2 · scale · max degree``."""
        return 2.0 * self.scale * float(np.max(self.degree, initial=0.0))


def graph_laplacian(graph: WeightedGraph) -> tuple[LaplacianOperator, LaplacianOperator]:
    """``(Δ_n, ℒ)`` for the graph, with σ_η taken in the intrinsic dimension."""
    n, d, eps = graph.n, graph.d, graph.epsilon
    w = graph.adjacency.matrix
    degree = np.asarray(w @ np.ones(n)).ravel()
    base = 1.0 / (n * eps ** (d + 2))
    _, sigma_eta = kernel_moments(graph.kernel, d)
    delta_n = LaplacianOperator(graph.adjacency, degree, base, graph.n_components)
    return delta_n, delta_n.rescaled(2.0 / sigma_eta)


def epsilon_for(n: int, d: int, c_eps: float = 1.0) -> float:
    """``c_eps (ln n / n)^{1/(d+4)}``."""
    if n < 2:
        raise ConfigurationError("default_epsilon needs n >= 2")
    return c_eps * (math.log(n) / n) ** (1.0 / (d + 4))


def default_epsilon(n: int, d: int, c_eps: float = 1.0) -> float:
    """:func:`epsilon_for`, with a warning below the connectivity heuristic."""
    eps = epsilon_for(n, d, c_eps)
    ratio = math.log(n) / n
    floor = 2.0 * ratio ** (1.0 / d)
    if eps < floor:
        logger.warning(
            "epsilon=%.4g is below 2 (ln n / n)^(1/d) = %.4g; the graph may be disconnected",
            eps, floor,
        )
    return eps
