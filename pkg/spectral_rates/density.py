"""Densities on manifolds: the uniform density and the bump family on T^d.

A bump density is ``ρ_c = 1 + m⁻² Σ_i c_i a_i`` over the ``m^d`` cubes of the
torus, where ``a_i(x) = φ(m(x - b_i))`` and ``φ(z) = φ₀(|z - u₊|) - φ₀(|z - u₋|)``
with ``u± = ±(1/4, ..., 1/4)``. The scalar mollifier ``φ₀`` is normalised to
``φ₀(0) = 1``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ConfigurationError
from .geometry import ManifoldModel, PointCloud, make_manifold, make_rng, uniform_points

logger = logging.getLogger(__name__)

MOLLIFIER_SUPPORT = 1.0 / 8.0
MOLLIFIER_CONSTANT = math.e


def mollifier(t):
    """``e · exp(1/(64t² - 1))`` on ``[0, 1/8)``, zero elsewhere."""
    t = np.asarray(t, dtype=float)
    inside = t < MOLLIFIER_SUPPORT
    denom = np.where(inside, 64.0 * t * t - 1.0, -1.0)
    out = np.where(inside, MOLLIFIER_CONSTANT * np.exp(1.0 / denom), 0.0)
    return out if out.ndim else float(out)


def mollifier_derivative_over_t(t):
    """``φ₀'(t) / t``, finite at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    inside = t < MOLLIFIER_SUPPORT
    denom = np.where(inside, 64.0 * t * t - 1.0, -1.0)
    return np.where(inside, -128.0 * mollifier(t) / denom**2, 0.0)


def mollifier_derivative(t):
    return np.asarray(t, dtype=float) * mollifier_derivative_over_t(t)


@dataclass(frozen=True)
class BumpTemplate:
    """Cube partition of T^d into ``m^d`` cells with centers ``b_i``."""

    m: int
    d: int

    @property
    def n_cubes(self) -> int:
        return self.m**self.d

    @property
    def amplitude(self) -> float:
        return 1.0 / self.m**2

    def centers(self) -> np.ndarray:
        idx = np.indices([self.m] * self.d).reshape(self.d, -1).T
        return (idx + 0.5) / self.m

    def locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Flat cube index (row-major) and local coordinate ``m(x - b_i)``."""
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        cell = np.minimum(np.floor(x * self.m).astype(np.int64), self.m - 1)
        local = x * self.m - cell - 0.5
        flat = np.ravel_multi_index(tuple(cell.T), [self.m] * self.d)
        return flat, local

    def template(self, z: np.ndarray) -> np.ndarray:
        u = np.full(self.d, 0.25)
        return mollifier(np.linalg.norm(z - u, axis=-1)) - mollifier(np.linalg.norm(z + u, axis=-1))

    def template_gradient(self, z: np.ndarray) -> np.ndarray:
        u = np.full(self.d, 0.25)
        plus = z - u
        minus = z + u
        g_plus = mollifier_derivative_over_t(np.linalg.norm(plus, axis=-1))[:, None] * plus
        g_minus = mollifier_derivative_over_t(np.linalg.norm(minus, axis=-1))[:, None] * minus
        return g_plus - g_minus


@dataclass(frozen=True)
class DensityModel:
    model: ManifoldModel
    kind: str
    rho_min: float
    rho_max: float
    m: int = 0
    signs: tuple[int, ...] = ()

    @property
    def template(self) -> BumpTemplate:
        return BumpTemplate(self.m, self.model.intrinsic_dim)

    def describe(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        pattern = "".join("+" if s > 0 else "-" for s in self.signs)
        return f"bump:{self.m}:{pattern}"

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "uniform":
            return np.full(x.shape[0], 1.0 / self.model.volume)
        flat, local = self.template.locate(x)
        c = np.asarray(self.signs, dtype=float)[flat]
        return 1.0 + self.template.amplitude * c * self.template.template(local)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "uniform":
            return np.zeros_like(x)
        flat, local = self.template.locate(x)
        c = np.asarray(self.signs, dtype=float)[flat]
        # chain rule through z = m(x - b_i)
        scale = self.template.amplitude * self.m
        return scale * c[:, None] * self.template.template_gradient(local)


def uniform_density(model: ManifoldModel) -> DensityModel:
    value = 1.0 / model.volume
    return DensityModel(model=model, kind="uniform", rho_min=value, rho_max=value)


def bump_density(m: int, signs, d: int = 1) -> DensityModel:
    signs = tuple(int(s) for s in np.asarray(signs).ravel())
    if m < 2:
        raise ConfigurationError(f"bump family needs m >= 2, got {m}")
    if len(signs) != m**d:
        raise ConfigurationError(f"expected {m**d} signs for m={m}, d={d}, got {len(signs)}")
    if any(s not in (-1, 1) for s in signs):
        raise ConfigurationError("bump signs must be +1 or -1")
    model = make_manifold("torus", d)
    amp = 1.0 / m**2
    return DensityModel(
        model=model, kind="bump", rho_min=1.0 - amp, rho_max=1.0 + amp, m=m, signs=signs
    )


def sign_pattern(pattern: str, length: int, seed: int = 0) -> np.ndarray:
    """``plus``, ``minus``, ``alternating``, ``random`` or an explicit ``+-`` string."""
    if pattern == "plus":
        return np.ones(length, dtype=int)
    if pattern == "minus":
        return -np.ones(length, dtype=int)
    if pattern == "alternating":
        return np.where(np.arange(length) % 2 == 0, 1, -1)
    if pattern == "random":
        return make_rng(seed).choice(np.array([-1, 1]), size=length)
    if set(pattern) <= {"+", "-"} and len(pattern) == length:
        return np.array([1 if ch == "+" else -1 for ch in pattern])
    raise ConfigurationError(f"unknown sign pattern {pattern!r} for length {length}")


def parse_density(text: str, model: ManifoldModel, seed: int = 0) -> DensityModel:
    """Density from a config string: ``uniform`` or ``bump:<m>:<pattern>``."""
    text = text.strip()
    if text == "uniform":
        return uniform_density(model)
    parts = text.split(":")
    if parts[0] == "bump" and len(parts) == 3 and parts[1].isdigit():
        if not model.is_torus:
            raise CapabilityError("bump densities are defined on tori only")
        m = int(parts[1])
        d = model.intrinsic_dim
        return bump_density(m, sign_pattern(parts[2], m**d, seed), d=d)
    raise ConfigurationError(f"cannot parse density {text!r}")


def sample(rho: DensityModel, n: int, seed: int, trial: int = 0) -> PointCloud:
    """Rejection sampling against a uniform proposal with envelope ``rho_max``."""
    rng = make_rng(seed, trial)
    model = rho.model
    if n == 0:
        return PointCloud(model=model, points=np.empty((0, model.ambient_dim)), seed=seed ^ trial)
    if rho.kind == "uniform":
        points = uniform_points(model, n, rng)
        return PointCloud(model=model, points=points, seed=seed ^ trial, sampler="uniform", proposals=n)
    envelope = rho.rho_max
    accepted: list[np.ndarray] = []
    have = 0
    proposals = 0
    while have < n:
        batch = max(64, int((n - have) * envelope * model.volume))
        x = uniform_points(model, batch, rng)
        keep = rng.random(batch) * envelope < rho.evaluate(x)
        proposals += batch
        accepted.append(x[keep])
        have += int(keep.sum())
    points = np.concatenate(accepted)[:n]
    logger.debug("rejection sampler: %d proposals for %d points", proposals, n)
    return PointCloud(
        model=model, points=points, seed=seed ^ trial, sampler="rejection", proposals=proposals
    )


def periodic_grid_points(d: int, resolution: int) -> np.ndarray:
    axes = [np.arange(resolution) / resolution] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


DEFAULT_KL_GRID = {1: 2048, 2: 512}


def _grid_values(rho1: DensityModel, rho2: DensityModel, grid: int | None):
    for rho in (rho1, rho2):
        if not rho.model.is_torus:
            raise CapabilityError("divergences use periodic grid quadrature on tori only")
    d = rho1.model.intrinsic_dim
    if d != rho2.model.intrinsic_dim:
        raise ConfigurationError("densities live on different tori")
    if d not in DEFAULT_KL_GRID:
        raise CapabilityError(f"grid quadrature implemented for d <= 2, got d={d}")
    grid = grid or DEFAULT_KL_GRID[d]
    x = periodic_grid_points(d, grid)
    return rho1.evaluate(x), rho2.evaluate(x)


def kl_divergence(
    rho1: DensityModel, rho2: DensityModel, grid: int | None = None, richardson_tol: float = 1e-8
) -> float:
    """Trapezoidal ``∫ ρ₁ log(ρ₁/ρ₂)`` on a uniform periodic grid."""
    p, q = _grid_values(rho1, rho2, grid)
    value = float(np.mean(p * np.log(p / q)))
    grid = grid or DEFAULT_KL_GRID[rho1.model.intrinsic_dim]
    if richardson_tol is not None and grid >= 32:
        p_half, q_half = _grid_values(rho1, rho2, grid // 2)
        coarse = float(np.mean(p_half * np.log(p_half / q_half)))
        if abs(coarse - value) > richardson_tol:
            logger.warning(
                "KL quadrature not resolved: %.3e at N=%d vs %.3e at N=%d",
                value, grid, coarse, grid // 2,
            )
    return value


def chi2_divergence(rho1: DensityModel, rho2: DensityModel, grid: int | None = None) -> float:
    """``∫ (ρ₁ - ρ₂)² / ρ₂``, an upper bound for the KL divergence."""
    p, q = _grid_values(rho1, rho2, grid)
    return float(np.mean((p - q) ** 2 / q))


def sufficiently_different(c1, c2, index_set_fraction: float = 0.25) -> bool:
    """True when the sign vectors disagree on at least the given fraction of indices."""
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    if c1.shape != c2.shape:
        raise ConfigurationError("sign vectors have different lengths")
    return bool(np.count_nonzero(c1 != c2) >= index_set_fraction * c1.size)
