"""Extension of graph functions to the whole manifold.

``Λ_r u(x) = Σ_j u(x_j) k_r(x, x_j) / Σ_j k_r(x, x_j)`` with
``k_r(x, y) = r^{-d} ψ(|x - y| / r)`` and ``ψ(t) = ∫_t^1 η(s) s ds``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import CoverageError
from .geometry import (
    ContinuumEigenpair,
    PointCloud,
    combine,
    displacement,
    sample_uniform,
    tangent_project,
)
from .graph import CellList, Kernel
from .norms import align

logger = logging.getLogger(__name__)

SPLINE_KNOTS = 2048
COVERAGE_FLAG_FRACTION = 1e-3
CHUNK = 4096


@lru_cache(maxsize=None)
def _psi_spline(kernel: Kernel) -> CubicSpline:
    knots = np.linspace(0.0, 1.0, SPLINE_KNOTS)
    values = np.array(
        [
            integrate.quad(lambda s: float(kernel.profile(s)) * s, t, 1.0, epsabs=1e-15, epsrel=1e-12)[0]
            for t in knots
        ]
    )
    slope_end = -float(kernel.profile(1.0))
    return CubicSpline(knots, values, bc_type=((1, 0.0), (1, slope_end)))


@dataclass(frozen=True)
class ExtensionKernel:
    """ψ for a base kernel η, at bandwidth ``r``."""

    kernel: Kernel
    r: float

    def psi_prime(self, t):
        t = np.asarray(t, dtype=float)
        return -self.kernel.profile(t) * t

    def weight(self, dist, d: int):
        return self.r ** (-d) * psi_eval(self, np.asarray(dist) / self.r)


def psi_eval(ek: ExtensionKernel, t):
    """ψ at scalar or array ``t``: closed form for the tent, the spline otherwise."""
    t = np.asarray(t, dtype=float)
    inside = t < 1.0
    clipped = np.clip(t, 0.0, 1.0)
    if ek.kernel.name == "tent":
        values = ek.kernel.scale * (1.0 / 6.0 - clipped**2 / 2.0 + clipped**3 / 3.0)
    else:
        values = _psi_spline(ek.kernel)(clipped)
    out = np.where(inside, values, 0.0)
    return out if out.ndim else float(out)


class Extension:
    """``Λ_r`` over a fixed cloud; the r-neighbourhoods come from one cell list."""

    def __init__(self, cloud: PointCloud, r: float, kernel: Kernel | None = None):
        self.cloud = cloud
        self.model = cloud.model
        self.d = cloud.model.intrinsic_dim
        self.ek = ExtensionKernel(kernel or Kernel("tent"), float(r))
        self.cells = CellList(cloud.model, cloud.points, r)

    def evaluate(self, u, x, gradient: bool = True):
        """Values, tangential gradients and the coverage mask at query points.

        Uncovered points get NaN values and gradients.
        """
        u = np.asarray(u, dtype=float)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        values = np.full(len(x), np.nan)
        grads = np.full(x.shape, np.nan) if gradient else None
        for lo in range(0, len(x), CHUNK):
            chunk = x[lo : lo + CHUNK]
            v, g = self._chunk(u, chunk, gradient)
            values[lo : lo + CHUNK] = v
            if gradient:
                grads[lo : lo + CHUNK] = g
        return values, grads, np.isfinite(values)

    def _chunk(self, u, queries, gradient):
        q = len(queries)
        qi, pj, dist = self.cells.cross_pairs(queries)
        r, d = self.ek.r, self.d
        k = self.ek.weight(dist, d)
        theta = np.bincount(qi, weights=k, minlength=q)
        covered = theta > 0
        num = np.bincount(qi, weights=k * u[pj], minlength=q)
        values = np.divide(num, theta, out=np.full(q, np.nan), where=covered)
        if not gradient:
            return values, None
        # ∇_x k_r(x, x_j) = r^{-(d+2)} η(|x - x_j| / r) P_x (x_j - x)
        toward = displacement(self.model, queries[qi], self.cloud.points[pj])
        dk = r ** (-(d + 2)) * self.ek.kernel.profile(dist / r)[:, None] * tangent_project(
            self.model, queries[qi], toward
        )
        centered = u[pj] - np.where(covered, values, 0.0)[qi]
        contrib = centered[:, None] * dk
        grads = np.column_stack(
            [np.bincount(qi, weights=contrib[:, a], minlength=q) for a in range(queries.shape[1])]
        )
        grads = np.where(covered[:, None], grads / np.where(covered, theta, 1.0)[:, None], np.nan)
        return values, grads


def extend(u, cloud: PointCloud, r: float, x, kernel: Kernel | None = None):
    values, _, covered = Extension(cloud, r, kernel).evaluate(u, x, gradient=False)
    if not covered.all():
        raise CoverageError(f"{int((~covered).sum())} query points have no sample within r={r}")
    return float(values[0]) if np.ndim(x) == 1 else values


def extend_grad(u, cloud: PointCloud, r: float, x, kernel: Kernel | None = None):
    _, grads, covered = Extension(cloud, r, kernel).evaluate(u, x)
    if not covered.all():
        raise CoverageError(f"{int((~covered).sum())} query points have no sample within r={r}")
    return grads[0] if np.ndim(x) == 1 else grads


def extend_many(u, cloud: PointCloud, r: float, xs, kernel: Kernel | None = None):
    """Values, gradients and coverage at many points without raising."""
    return Extension(cloud, r, kernel).evaluate(u, xs)


class ExtensionError(NamedTuple):
    l2_err: float
    h1_err: float
    l2_se: float
    h1_se: float
    coverage_miss_frac: float
    flagged: bool


def _norm_with_se(samples: np.ndarray, volume: float) -> tuple[float, float]:
    mean = volume * float(samples.mean())
    se = volume * float(samples.std(ddof=1)) / math.sqrt(len(samples))
    root = math.sqrt(max(mean, 0.0))
    return root, se / (2.0 * root) if root > 0 else 0.0


def extension_h1_error(
    phi,
    level: list[ContinuumEigenpair],
    cloud: PointCloud,
    epsilon: float,
    n_mc: int,
    seed: int,
    kernel: Kernel | None = None,
    r: float | None = None,
) -> ExtensionError:
    """Monte Carlo L² and H¹ errors of ``Λ_{ε/2} φ`` against the aligned exact eigenfunction."""
    model = cloud.model
    r = epsilon / 2.0 if r is None else r
    _, coeffs = align(phi, level, cloud)
    target = combine(level, coeffs)
    x = sample_uniform(model, n_mc, seed).points
    values, grads, covered = Extension(cloud, r, kernel).evaluate(phi, x)
    misses = int((~covered).sum())
    if misses == n_mc:
        raise CoverageError(f"no Monte Carlo point is within r={r} of the cloud")
    miss_frac = misses / n_mc
    flagged = miss_frac >= COVERAGE_FLAG_FRACTION
    if flagged:
        logger.warning("extension coverage: %.3f%% of Monte Carlo points uncovered at r=%.4g", 100 * miss_frac, r)
    xc = x[covered]
    value_sq = (values[covered] - target.eval(xc)) ** 2
    grad_sq = np.sum((grads[covered] - target.grad(xc)) ** 2, axis=1)
    l2_err, l2_se = _norm_with_se(value_sq, model.volume)
    h1_err, h1_se = _norm_with_se(grad_sq, model.volume)
    return ExtensionError(l2_err, h1_err, l2_se, h1_se, miss_frac, flagged)


def gradient_energy(u, cloud: PointCloud, r: float, n_mc: int, seed: int, kernel: Kernel | None = None) -> float:
    """Monte Carlo ``∫ |∇Λ_r u|²`` over covered points."""
    x = sample_uniform(cloud.model, n_mc, seed).points
    _, grads, covered = Extension(cloud, r, kernel).evaluate(u, x)
    return cloud.model.volume * float(np.mean(np.sum(grads[covered] ** 2, axis=1)))
