"""Lanczos eigenpairs and mean-zero Poisson solves against matvec operators.

Vectors are compared in the empirical inner product ``⟨u, v⟩ = mean(u v)``.
Operators are anything :func:`scipy.sparse.linalg.aslinearoperator` accepts;
an ``n_components`` attribute larger than one marks a disconnected graph.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import aslinearoperator

from .errors import ConfigurationError, ConvergenceError, DisconnectedGraphError
from .geometry import make_rng

logger = logging.getLogger(__name__)

DEFAULT_EIG_TOL = 1e-8
DEFAULT_CG_TOL = 1e-10


def l2_inner(u, v) -> float:
    return float(np.mean(np.asarray(u) * np.asarray(v)))


def l2_norm(u) -> float:
    return math.sqrt(max(l2_inner(u, u), 0.0))


@dataclass(frozen=True)
class EigPair:
    value: float
    vector: np.ndarray
    residual: float


def _as_operator(op):
    if getattr(op, "n_components", 1) > 1:
        raise DisconnectedGraphError(op.n_components)
    return aslinearoperator(op)


def _fix_sign(x: np.ndarray) -> np.ndarray:
    pivot = np.argmax(np.abs(x))
    return -x if x[pivot] < 0 else x


def _finish(a, values, vectors) -> list[EigPair]:
    pairs = []
    n = vectors.shape[0]
    for i in range(len(values)):
        x = _fix_sign(vectors[:, i])
        ax = a.matvec(x)
        theta = float(x @ ax)
        residual = float(np.linalg.norm(ax - theta * x))
        pairs.append(EigPair(value=theta, vector=x * math.sqrt(n), residual=residual))
    pairs.sort(key=lambda p: p.value)
    return pairs


def dense_smallest(op, k: int) -> list[EigPair]:
    """Oracle: the ``k`` smallest eigenpairs from a dense symmetric solve."""
    a = _as_operator(op)
    n = a.shape[0]
    dense = a.matmat(np.eye(n))
    dense = 0.5 * (dense + dense.T)
    values, vectors = np.linalg.eigh(dense)
    return _finish(a, values[:k], vectors[:, :k])


class _Lanczos:
    """One explicitly restarted Lanczos cycle with full reorthogonalization."""

    def __init__(self, a, locked: np.ndarray, krylov_dim: int, check_every: int = 10):
        self.a = a
        self.locked = locked
        self.krylov_dim = krylov_dim
        self.check_every = check_every

    def _orthogonalize(self, w: np.ndarray, basis: np.ndarray) -> np.ndarray:
        for _ in range(2):
            if basis.shape[1]:
                w = w - basis @ (basis.T @ w)
            if self.locked.shape[1]:
                w = w - self.locked @ (self.locked.T @ w)
        return w

    def run(self, start: np.ndarray, wanted: int, tol_abs: float, first_only: bool = False):
        n = start.shape[0]
        m = self.krylov_dim
        basis = np.zeros((n, m), order="F")
        alpha = np.zeros(m)
        beta = np.zeros(m)
        q = self._orthogonalize(start, basis[:, :0])
        q /= np.linalg.norm(q)
        steps = 0
        invariant = False
        for j in range(m):
            basis[:, j] = q
            w = self.a.matvec(q)
            steps += 1
            alpha[j] = q @ w
            w = w - alpha[j] * q
            if j:
                w = w - beta[j - 1] * basis[:, j - 1]
            w = self._orthogonalize(w, basis[:, : j + 1])
            beta[j] = np.linalg.norm(w)
            scale = max(abs(alpha[: j + 1]).max(), beta[: j + 1].max(), 1.0)
            if beta[j] <= 1e-13 * scale:
                invariant = True
                break
            if j + 1 < m and (j + 1) % self.check_every == 0:
                theta, resid, _ = self._ritz(alpha, beta, j + 1, invariant)
                count = 1 if first_only else min(wanted, j + 1)
                if np.all(resid[:count] <= tol_abs):
                    break
            q = w / beta[j]
        size = steps
        theta, resid, s = self._ritz(alpha, beta, size, invariant)
        return theta, resid, basis[:, :size] @ s, steps

    @staticmethod
    def _ritz(alpha, beta, size, invariant):
        if size == 1:
            theta = alpha[:1].copy()
            s = np.ones((1, 1))
        else:
            theta, s = eigh_tridiagonal(alpha[:size], beta[: size - 1])
        if invariant:
            resid = np.zeros(size)
        else:
            resid = np.abs(beta[size - 1] * s[-1, :])
        return theta, resid, s


def lanczos_smallest(
    op,
    k: int,
    tol: float = DEFAULT_EIG_TOL,
    max_iter: int | None = None,
    seed: int = 0,
    krylov_dim: int | None = None,
) -> list[EigPair]:
    """The ``k`` algebraically smallest eigenpairs of a symmetric operator.

    Converged Ritz pairs are locked from the bottom of the spectrum and the
    iteration restarts in their orthogonal complement. Once ``k`` pairs are
    locked, fresh random cycles look for eigenvalues that were missed (extra
    copies of a repeated eigenvalue are invisible to a single Krylov space) and
    swap them in. ``tol`` is relative to the operator norm estimate and
    ``max_iter`` bounds the total number of matvecs.
    """
    a = _as_operator(op)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ConfigurationError(f"need 1 <= k <= n, got k={k}, n={n}")
    max_iter = max_iter or max(600, 40 * k)
    krylov_dim = krylov_dim or max(2 * k + 40, 120)
    rng = make_rng(seed)
    norm_fn = getattr(op, "norm_estimate", None)
    anorm = float(norm_fn()) if callable(norm_fn) else 0.0

    locked_vals: list[float] = []
    locked = np.zeros((n, 0))
    matvecs = 0
    best = np.full(k, np.inf)
    start = rng.standard_normal(n)
    verifying = False

    while True:
        room = n - locked.shape[1]
        if room <= 0:
            break
        remaining = max_iter - matvecs
        if remaining <= 0:
            raise ConvergenceError(
                f"Lanczos locked {locked.shape[1]} of {k} eigenpairs in {matvecs} matvecs",
                residuals=best,
            )
        m = min(krylov_dim, room, remaining)
        need = k - locked.shape[1]
        cycle = _Lanczos(a, locked, m)
        # the tolerance tracks the spectral spread seen so far
        tol_abs = tol * max(anorm, 1e-300)
        theta, resid, ritz, steps = cycle.run(start, max(need, 1), tol_abs, first_only=verifying)
        matvecs += steps
        anorm = max(anorm, float(np.abs(theta).max()))
        tol_abs = tol * anorm

        if not verifying:
            newly = 0
            for i in range(min(need, len(theta))):
                if resid[i] > tol_abs:
                    break
                newly += 1
            best[locked.shape[1]: locked.shape[1] + min(need, len(theta))] = resid[: min(need, len(theta))]
            if newly:
                locked = np.column_stack([locked, ritz[:, :newly]])
                locked_vals.extend(theta[:newly].tolist())
                logger.debug("Lanczos locked %d pairs (%d/%d) after %d matvecs", newly, locked.shape[1], k, matvecs)
            if locked.shape[1] >= k:
                verifying = True
                start = rng.standard_normal(n)
                continue
            fresh = rng.standard_normal(n)
            unconverged = ritz[:, newly: newly + need].sum(axis=1) if len(theta) > newly else fresh
            start = unconverged / max(np.linalg.norm(unconverged), 1e-300) + fresh / np.linalg.norm(fresh)
            continue

        top = max(locked_vals)
        if resid[0] > tol_abs:
            start = ritz[:, 0] + rng.standard_normal(n) / math.sqrt(n)
            continue
        if theta[0] >= top - 100.0 * tol_abs:
            break
        # a missed eigenvalue below the current top: swap it in
        drop = int(np.argmax(locked_vals))
        keep = [i for i in range(len(locked_vals)) if i != drop]
        locked = np.column_stack([locked[:, keep], ritz[:, :1]])
        locked_vals = [locked_vals[i] for i in keep] + [float(theta[0])]
        logger.debug("Lanczos found a missed eigenvalue %.6g below %.6g", theta[0], top)
        start = rng.standard_normal(n)

    order = np.argsort(np.asarray(locked_vals), kind="stable")
    pairs = _finish(a, np.asarray(locked_vals)[order], locked[:, order])
    logger.debug("Lanczos: %d pairs, %d matvecs, max residual %.2e", k, matvecs, max(p.residual for p in pairs))
    return pairs[:k]


def cg_solve_meanzero(
    op,
    rhs,
    tol: float = DEFAULT_CG_TOL,
    max_iter: int | None = None,
    history: list | None = None,
) -> np.ndarray:
    """Solve ``op u = rhs - mean(rhs)`` for mean-zero ``u``.

    Uses the conjugate residual recurrence, whose residual norms never
    increase. Relative residual norms are appended to ``history`` if given.
    """
    a = _as_operator(op)
    b = np.asarray(rhs, dtype=float)
    b = b - b.mean()
    n = b.shape[0]
    max_iter = max_iter or max(10 * n, 1000)
    b_norm = np.linalg.norm(b)
    x = np.zeros(n)
    if b_norm == 0.0:
        return x

    def restart(r):
        ar = a.matvec(r)
        return r.copy(), ar, ar.copy(), float(r @ ar)

    r = b.copy()
    p, ar, ap, rar = restart(r)
    residuals = []
    for it in range(1, max_iter + 1):
        ap_sq = float(ap @ ap)
        if ap_sq == 0.0:
            break
        step = rar / ap_sq
        x += step * p
        x -= x.mean()
        r -= step * ap
        r -= r.mean()
        rel = np.linalg.norm(r) / b_norm
        residuals.append(rel)
        if rel <= tol:
            true_r = b - a.matvec(x)
            true_r -= true_r.mean()
            if np.linalg.norm(true_r) <= tol * b_norm:
                if history is not None:
                    history.extend(residuals)
                logger.debug("conjugate residual converged in %d iterations", it)
                return x
            r = true_r
            p, ar, ap, rar = restart(r)
            continue
        ar = a.matvec(r)
        rar_new = float(r @ ar)
        coeff = rar_new / rar
        rar = rar_new
        p = r + coeff * p
        ap = ar + coeff * ap
    if history is not None:
        history.extend(residuals)
    raise ConvergenceError(
        f"conjugate residual did not reach {tol:.1e} in {max_iter} iterations", residuals=residuals
    )


def pinv_quadform(op, h, tol: float = DEFAULT_CG_TOL, scale: float = 1.0) -> float:
    """``⟨h̃, (scale · op)⁺ h̃⟩`` with ``h̃ = h - mean(h)``."""
    h = np.asarray(h, dtype=float)
    centered = h - h.mean()
    if not np.any(centered):
        return 0.0
    w = cg_solve_meanzero(op, centered, tol=tol) / scale
    return max(l2_inner(centered, w), 0.0)
