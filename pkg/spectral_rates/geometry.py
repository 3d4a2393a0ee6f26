"""Manifold models: flat tori T^d (d = 1, 2, 3) and the unit sphere S².

Points are stored as ``(n, D)`` arrays. Torus coordinates live in ``[0, 1)``
and distances use the wrap (quotient) metric; sphere points are unit vectors
in R³ and the graph uses chordal distance.

The exact spectrum is that of the weighted Laplacian
``Δ_ρ f = -(1/ρ) div(ρ² ∇f)`` for the constant density ``ρ = 1/volume``.
Eigenfunctions are normalised in ``L²(ρ)``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CapabilityError, ConfigurationError, DomainError

logger = logging.getLogger(__name__)

TORUS = "torus"
SPHERE = "sphere2"


@dataclass(frozen=True)
class ManifoldModel:
    kind: str
    intrinsic_dim: int
    ambient_dim: int
    volume: float

    @property
    def name(self) -> str:
        if self.kind == TORUS:
            return f"torus{self.intrinsic_dim}"
        return SPHERE

    @property
    def metric(self) -> str:
        """Metric used between samples: ``wrap`` on tori, ``chordal`` on S²."""
        return "wrap" if self.kind == TORUS else "chordal"

    @property
    def is_torus(self) -> bool:
        return self.kind == TORUS

    @property
    def max_epsilon(self) -> float:
        """Exclusive upper bound on graph length scales (injectivity radius)."""
        return 0.5 if self.kind == TORUS else 1.0

    def density_constant(self) -> float:
        return 1.0 / self.volume


@dataclass(frozen=True)
class PointCloud:
    """Samples on a manifold and how they were drawn."""

    model: ManifoldModel
    points: np.ndarray
    seed: int | None = None
    sampler: str = "uniform"
    proposals: int = 0

    @property
    def n(self) -> int:
        return self.points.shape[0]


def make_manifold(kind: str, d: int | None = None) -> ManifoldModel:
    """Build a manifold model; ``d`` is ignored for the sphere."""
    if kind == TORUS:
        if d not in (1, 2, 3):
            raise ConfigurationError(f"torus dimension must be 1, 2 or 3, got {d!r}")
        return ManifoldModel(kind=TORUS, intrinsic_dim=d, ambient_dim=d, volume=1.0)
    if kind == SPHERE:
        return ManifoldModel(kind=SPHERE, intrinsic_dim=2, ambient_dim=3, volume=4.0 * math.pi)
    raise ConfigurationError(f"unsupported manifold kind {kind!r}")


def parse_manifold(name: str) -> ManifoldModel:
    """``torus1`` / ``torus2`` / ``torus3`` / ``sphere2`` as used in config files."""
    name = name.strip().lower()
    if name == SPHERE:
        return make_manifold(SPHERE)
    if name.startswith(TORUS) and name[len(TORUS):].isdigit():
        return make_manifold(TORUS, int(name[len(TORUS):]))
    raise ConfigurationError(f"unknown manifold {name!r}")


def make_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Counter-based stream for ``seed XOR trial``."""
    return np.random.Generator(np.random.Philox((int(seed) ^ int(trial)) & 0xFFFFFFFFFFFFFFFF))


def uniform_points(model: ManifoldModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if model.kind == TORUS:
        return rng.random((n, model.intrinsic_dim))
    g = rng.standard_normal((n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_uniform(model: ManifoldModel, n: int, seed: int, trial: int = 0) -> PointCloud:
    if n < 1:
        raise ConfigurationError("need at least one sample")
    points = uniform_points(model, n, make_rng(seed, trial))
    return PointCloud(model=model, points=points, seed=int(seed) ^ int(trial), proposals=n)


# -- metric ------------------------------------------------------------------


def wrap_difference(diff: np.ndarray) -> np.ndarray:
    """Representative of a torus displacement in ``[-1/2, 1/2]``; odd in ``diff``."""
    return diff - np.round(diff)


def displacement(model: ManifoldModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``y - x`` in ambient coordinates (wrapped on tori)."""
    diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    if model.kind == TORUS:
        return wrap_difference(diff)
    return diff


def ambient_distance(model: ManifoldModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Distance used by the graph builder (wrap on tori, chord on the sphere)."""
    return np.linalg.norm(displacement(model, x, y), axis=-1)


def distance(model: ManifoldModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Geodesic distance."""
    if model.kind == TORUS:
        return ambient_distance(model, x, y)
    dots = np.sum(np.asarray(x) * np.asarray(y), axis=-1)
    return np.arccos(np.clip(dots, -1.0, 1.0))


# -- tangent spaces ------------------------------------------------------------


def tangent_project(model: ManifoldModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ambient vectors ``v`` onto ``T_x M``."""
    if model.kind == TORUS:
        return np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - np.sum(x * v, axis=-1, keepdims=True) * x


def log_map(model: ManifoldModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if model.kind == TORUS:
        v = displacement(model, x, y)
        if np.any(np.abs(v) >= 0.5):
            raise DomainError("torus log map undefined at half-period displacement")
        return v
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cos_t = np.clip(np.dot(x, y), -1.0, 1.0)
    theta = math.acos(cos_t)
    if theta > math.pi - 1e-12:
        raise DomainError("sphere log map undefined at the antipode")
    w = y - cos_t * x
    norm_w = np.linalg.norm(w)
    if norm_w == 0.0:
        return np.zeros(3)
    return theta * w / norm_w


def exp_map(model: ManifoldModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if model.kind == TORUS:
        return np.mod(x + v, 1.0)
    t = np.linalg.norm(v)
    if t == 0.0:
        return x.copy()
    return math.cos(t) * x + math.sin(t) * v / t


# -- continuum spectrum ----------------------------------------------------------


@dataclass(frozen=True)
class FunctionWithGradient:
    """A smooth function on the manifold with its tangential gradient."""

    eval: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]


ZERO = FunctionWithGradient(
    eval=lambda x: np.zeros(np.asarray(x).shape[0]),
    grad=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
)


@dataclass(frozen=True)
class ContinuumEigenpair:
    lam: float
    multiplicity: int
    eval: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    label: str = field(default="")


def combine(pairs: list[ContinuumEigenpair], coeffs) -> FunctionWithGradient:
    """Linear combination ``Σ c_j f_j`` of eigenfunctions."""
    coeffs = np.asarray(coeffs, dtype=float)

    def _eval(x):
        return sum(c * p.eval(x) for c, p in zip(coeffs, pairs))

    def _grad(x):
        return sum(c * p.grad(x) for c, p in zip(coeffs, pairs))

    return FunctionWithGradient(eval=_eval, grad=_grad)


def _torus_mode(k: tuple[int, ...], kind: str, lam: float, mult: int) -> ContinuumEigenpair:
    kv = np.asarray(k, dtype=float)
    two_pi_k = 2.0 * math.pi * kv
    if kind == "const":
        return ContinuumEigenpair(
            lam=0.0,
            multiplicity=mult,
            eval=lambda x: np.ones(np.asarray(x).shape[0]),
            grad=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            label="1",
        )
    root2 = math.sqrt(2.0)
    if kind == "cos":

        def _eval(x):
            return root2 * np.cos(np.asarray(x) @ two_pi_k)

        def _grad(x):
            return -root2 * np.sin(np.asarray(x) @ two_pi_k)[:, None] * two_pi_k

    else:

        def _eval(x):
            return root2 * np.sin(np.asarray(x) @ two_pi_k)

        def _grad(x):
            return root2 * np.cos(np.asarray(x) @ two_pi_k)[:, None] * two_pi_k

    return ContinuumEigenpair(lam=lam, multiplicity=mult, eval=_eval, grad=_grad, label=f"{kind}{k}")


def _torus_spectrum(d: int, count: int) -> list[ContinuumEigenpair]:
    radius = 1
    while True:
        ks = [k for k in itertools.product(range(-radius, radius + 1), repeat=d)]
        # every mode with |k|² ≤ radius² is enumerated, so the cut below is exact
        ks = [k for k in ks if sum(c * c for c in k) <= radius * radius]
        half = [k for k in ks if k > tuple([0] * d)]
        n_modes = 1 + 2 * len(half)
        if n_modes >= count + 1 or radius > 64:
            break
        radius += 1
    mult: dict[int, int] = {}
    for k in ks:
        norm2 = sum(c * c for c in k)
        mult[norm2] = mult.get(norm2, 0) + 1
    modes: list[tuple[int, tuple[int, ...], str]] = [(0, tuple([0] * d), "const")]
    for k in sorted(half, key=lambda k: (sum(c * c for c in k), tuple(-c for c in k))):
        norm2 = sum(c * c for c in k)
        modes.append((norm2, k, "cos"))
        modes.append((norm2, k, "sin"))
    modes.sort(key=lambda m: m[0])
    out = []
    for norm2, k, kind in modes[:count]:
        lam = 4.0 * math.pi**2 * norm2
        out.append(_torus_mode(k, kind, lam, mult[norm2]))
    return out


# Real spherical harmonics up to order 3 as harmonic homogeneous polynomials
# {(a, b, c): coefficient of x^a y^b z^c}, each with its orthonormalising constant.
_SPHERICAL_HARMONICS: list[tuple[int, float, dict[tuple[int, int, int], float]]] = [
    (0, 0.5 / math.sqrt(math.pi), {(0, 0, 0): 1.0}),
    (1, math.sqrt(3.0 / (4.0 * math.pi)), {(0, 1, 0): 1.0}),
    (1, math.sqrt(3.0 / (4.0 * math.pi)), {(0, 0, 1): 1.0}),
    (1, math.sqrt(3.0 / (4.0 * math.pi)), {(1, 0, 0): 1.0}),
    (2, 0.5 * math.sqrt(15.0 / math.pi), {(1, 1, 0): 1.0}),
    (2, 0.5 * math.sqrt(15.0 / math.pi), {(0, 1, 1): 1.0}),
    (2, 0.25 * math.sqrt(5.0 / math.pi), {(0, 0, 2): 2.0, (2, 0, 0): -1.0, (0, 2, 0): -1.0}),
    (2, 0.5 * math.sqrt(15.0 / math.pi), {(1, 0, 1): 1.0}),
    (2, 0.25 * math.sqrt(15.0 / math.pi), {(2, 0, 0): 1.0, (0, 2, 0): -1.0}),
    (3, 0.25 * math.sqrt(35.0 / (2.0 * math.pi)), {(2, 1, 0): 3.0, (0, 3, 0): -1.0}),
    (3, 0.5 * math.sqrt(105.0 / math.pi), {(1, 1, 1): 1.0}),
    (3, 0.25 * math.sqrt(21.0 / (2.0 * math.pi)), {(0, 1, 2): 4.0, (2, 1, 0): -1.0, (0, 3, 0): -1.0}),
    (3, 0.25 * math.sqrt(7.0 / math.pi), {(0, 0, 3): 2.0, (2, 0, 1): -3.0, (0, 2, 1): -3.0}),
    (3, 0.25 * math.sqrt(21.0 / (2.0 * math.pi)), {(1, 0, 2): 4.0, (3, 0, 0): -1.0, (1, 2, 0): -1.0}),
    (3, 0.25 * math.sqrt(105.0 / math.pi), {(2, 0, 1): 1.0, (0, 2, 1): -1.0}),
    (3, 0.25 * math.sqrt(35.0 / (2.0 * math.pi)), {(3, 0, 0): 1.0, (1, 2, 0): -3.0}),
]


def _monomial(x: np.ndarray, powers: tuple[int, int, int]) -> np.ndarray:
    out = np.ones(x.shape[0])
    for axis, p in enumerate(powers):
        if p:
            out = out * x[:, axis] ** p
    return out


def _polynomial_value(x: np.ndarray, poly: dict) -> np.ndarray:
    return sum(c * _monomial(x, powers) for powers, c in poly.items())


def _polynomial_gradient(x: np.ndarray, poly: dict) -> np.ndarray:
    grad = np.zeros_like(x)
    for powers, c in poly.items():
        for axis in range(3):
            p = powers[axis]
            if p == 0:
                continue
            lowered = list(powers)
            lowered[axis] = p - 1
            grad[:, axis] += c * p * _monomial(x, tuple(lowered))
    return grad


def _sphere_mode(ell: int, norm: float, poly: dict, index: int) -> ContinuumEigenpair:
    # L²(ρ) normalisation with ρ = 1/(4π)
    scale = norm * math.sqrt(4.0 * math.pi)

    def _eval(x):
        return scale * _polynomial_value(np.asarray(x, dtype=float), poly)

    def _grad(x):
        x = np.asarray(x, dtype=float)
        g = scale * _polynomial_gradient(x, poly)
        return g - np.sum(g * x, axis=1, keepdims=True) * x

    return ContinuumEigenpair(
        lam=ell * (ell + 1) / (4.0 * math.pi),
        multiplicity=2 * ell + 1,
        eval=_eval,
        grad=_grad,
        label=f"Y{ell}[{index}]",
    )


def exact_spectrum(model: ManifoldModel, count: int) -> list[ContinuumEigenpair]:
    """The ``count`` lowest continuum eigenpairs, ascending, with multiplicity."""
    if count < 1:
        raise ConfigurationError("count must be positive")
    if model.kind == TORUS:
        return _torus_spectrum(model.intrinsic_dim, count)
    if count > len(_SPHERICAL_HARMONICS):
        raise CapabilityError(
            f"spherical harmonics are implemented through order 3 ({len(_SPHERICAL_HARMONICS)} "
            f"functions), {count} requested"
        )
    return [
        _sphere_mode(ell, norm, poly, i)
        for i, (ell, norm, poly) in enumerate(_SPHERICAL_HARMONICS[:count])
    ]


def eigenspace(model: ManifoldModel, l: int) -> tuple[list[ContinuumEigenpair], int]:
    """Full level set containing the ``l``-th eigenvalue (1-based).

    Returns the pairs of the level and the 1-based index of its first member.
    """
    if l < 1:
        raise ConfigurationError("eigenpair index is 1-based")
    spectrum = exact_spectrum(model, l)
    lam = spectrum[l - 1].lam
    mult = spectrum[l - 1].multiplicity
    start = next(i for i, p in enumerate(spectrum) if math.isclose(p.lam, lam, abs_tol=1e-12))
    full = exact_spectrum(model, start + mult)
    return full[start:start + mult], start + 1


def eigenvalue_levels(model: ManifoldModel, count: int) -> list[tuple[float, int]]:
    """The ``count`` lowest distinct eigenvalues with their multiplicities.

    Closed form, so levels beyond the implemented eigenfunctions are available.
    """
    if count < 1:
        raise ConfigurationError("count must be positive")
    if model.kind == SPHERE:
        return [(ell * (ell + 1) / (4.0 * math.pi), 2 * ell + 1) for ell in range(count)]
    d = model.intrinsic_dim
    radius = 1
    while True:
        mult: dict[int, int] = {}
        for k in itertools.product(range(-radius, radius + 1), repeat=d):
            norm2 = sum(c * c for c in k)
            if norm2 <= radius * radius:
                mult[norm2] = mult.get(norm2, 0) + 1
        if len(mult) >= count:
            break
        radius += 1
    return [(4.0 * math.pi**2 * norm2, mult[norm2]) for norm2 in sorted(mult)[:count]]


def level_of(model: ManifoldModel, l: int) -> tuple[int, int]:
    """0-based level holding the ``l``-th eigenvalue and the 1-based index of its first member."""
    if l < 1:
        raise ConfigurationError("eigenpair index is 1-based")
    count = 2
    while True:
        first = 1
        for j, (_, mult) in enumerate(eigenvalue_levels(model, count)):
            if first + mult > l:
                return j, first
            first += mult
        count *= 2


def spectral_gap(model: ManifoldModel, l: int) -> float:
    """γ_l: distance from λ_l to the nearest distinct eigenvalue."""
    j, _ = level_of(model, l)
    levels = eigenvalue_levels(model, j + 2)
    lam = levels[j][0]
    gaps = [levels[j + 1][0] - lam]
    if j > 0:
        gaps.append(lam - levels[j - 1][0])
    return min(gaps)
