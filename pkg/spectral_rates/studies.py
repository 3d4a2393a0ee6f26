"""Study drivers.

Each study expands its configuration into ``(x, trial)`` tasks, runs one
trial per task (optionally in a process pool) and collects the rows into a
:class:`~spectral_rates.report.ConvergenceReport`. Trials that hit a
structural failure are excluded and counted; more than 20% failures aborts
the study.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache

import numpy as np
import pandas as pd

from .calibration import check_frozen, frozen_constant
from .config import ExperimentConfig
from .density import (
    bump_density,
    chi2_divergence,
    kl_divergence,
    parse_density,
    sample,
    sign_pattern,
    sufficiently_different,
)
from .errors import (
    CapabilityError,
    ConvergenceError,
    CoverageError,
    DegenerateAlignmentError,
    DegenerateBasisError,
    DisconnectedGraphError,
    StudyAbortedError,
)
from .extension import extension_h1_error
from .geometry import eigenspace, eigenvalue_levels, make_rng, parse_manifold, spectral_gap
from .graph import build_graph, default_epsilon, graph_laplacian, kernel_moments, make_kernel
from .linalg import cg_solve_meanzero, l2_inner, l2_norm, lanczos_smallest
from .norms import (
    align,
    dual_pairing_violations,
    error_functional,
    h1_norm,
    hminus1_exact,
    multiscale_hminus1,
    subspace_residual,
)
from .pde import (
    PeriodicGrid,
    eigenpair_metric,
    eigenpair_separation,
    grid_eigenpairs,
    grid_operator,
    level_block,
    perturbation_ratios,
    plugin_estimate,
)
from .report import ConvergenceReport

logger = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.2
PAIRING_TESTS = 500
IDENTITY_TOL = 1e-6
TRIAL_FAILURES = (
    DisconnectedGraphError,
    CoverageError,
    ConvergenceError,
    DegenerateAlignmentError,
    DegenerateBasisError,
)


def trial_seed(base: int, x, trial: int) -> int:
    """Seed of one trial, derived from the base seed, the task size and the trial index."""
    key = [int(base) & 0xFFFFFFFF, trial]
    for value in np.atleast_1d(x):
        key.append(int(round(float(value) * 1_000_000)))
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0] >> 1)


# -- shared pipeline pieces --------------------------------------------------------


def _require_uniform(cfg: ExperimentConfig):
    if cfg.density != "uniform":
        raise CapabilityError(f"the {cfg.study} study needs the uniform density (exact spectrum)")


def _graph_for(cfg: ExperimentConfig, n: int, seed: int, epsilon: float | None = None):
    model = parse_manifold(cfg.manifold)
    rho = parse_density(cfg.density, model, cfg.seed)
    cloud = sample(rho, n, seed)
    eps = epsilon or cfg.epsilon or default_epsilon(n, model.intrinsic_dim, cfg.epsilon_constant)
    graph = build_graph(cloud, eps, make_kernel(cfg.kernel))
    if not graph.connected:
        raise DisconnectedGraphError(graph.n_components)
    return model, cloud, graph


def _spectral_pipeline(cfg: ExperimentConfig, n: int, seed: int):
    model, cloud, graph = _graph_for(cfg, n, seed)
    _, rescaled = graph_laplacian(graph)
    level, start = eigenspace(model, cfg.l)
    k = max(cfg.l, start - 1 + len(level))
    pairs = lanczos_smallest(rescaled, k, seed=seed)
    return model, cloud, graph, rescaled, level, pairs[cfg.l - 1]


def _row(n, eps, lambda_rel_err=0.0, l2_err=0.0, h1_err=0.0, E_l=0.0, aux1=0.0, aux2=0.0, **extra) -> dict:
    row = dict(n=n, eps=eps, lambda_rel_err=lambda_rel_err, l2_err=l2_err, h1_err=h1_err, E_l=E_l, aux1=aux1, aux2=aux2)
    row.update(extra)
    return row


# -- trials -------------------------------------------------------------------------


def spectral_trial(cfg: ExperimentConfig, n: int, seed: int) -> dict:
    model, cloud, graph, rescaled, level, pair = _spectral_pipeline(cfg, n, seed)
    lam = level[0].lam
    record = error_functional(
        pair.value, pair.vector, level, spectral_gap(model, cfg.l), graph, cloud,
        seed=seed, l=cfg.l, manifold=cfg.manifold, density=cfg.density, kernel=cfg.kernel,
    )
    # ⟨φ, ℒf - λf⟩ / ⟨φ, f⟩ equals λ_n - λ for an exact eigenvector φ
    target, _ = align(pair.vector, level, cloud)
    quotient = l2_inner(pair.vector, rescaled.matvec(target) - lam * target) / l2_inner(pair.vector, target)
    mismatch = abs(quotient - (pair.value - lam)) > 1e-6 * lam
    if mismatch:
        logger.warning("eigenvalue identity off by %.3e at n=%d seed=%d", quotient - (pair.value - lam), n, seed)
    return _row(
        n, graph.epsilon, record.lambda_rel_err, record.l2_err, record.h1_err, record.E_l,
        aux1=quotient, aux2=graph.epsilon * math.sqrt(lam), flagged=mismatch,
    )


def poisson_trial(cfg: ExperimentConfig, x, seed: int) -> dict:
    n, eps = x
    model, cloud, graph = _graph_for(cfg, int(n), seed, epsilon=eps or None)
    if not model.is_torus:
        raise CapabilityError("the Poisson study runs on tori")
    _, rescaled = graph_laplacian(graph)
    x1 = cloud.points[:, 0]
    exact = math.sqrt(2.0) * np.cos(2.0 * math.pi * x1)
    rhs = 4.0 * math.pi**2 * exact
    history: list[float] = []
    u = cg_solve_meanzero(rescaled, rhs, tol=1e-10, history=history)
    centered = rhs - rhs.mean()
    residual = np.linalg.norm(rescaled.matvec(u) - centered) / np.linalg.norm(centered)
    diff = u - (exact - exact.mean())
    h1 = h1_norm(diff, graph)
    return _row(int(n), graph.epsilon, 0.0, l2_norm(diff), h1, h1, aux1=residual, aux2=len(history))


def hminus1_trial(cfg: ExperimentConfig, n: int, seed: int) -> dict:
    model, cloud, graph = _graph_for(cfg, n, seed)
    if not model.is_torus:
        raise CapabilityError("the multiscale estimate is defined on tori")
    _, rescaled = graph_laplacian(graph)
    _, sigma = kernel_moments(graph.kernel, graph.d)
    level, _ = eigenspace(model, cfg.l)
    f = level[0].eval(cloud.points)
    lam = level[0].lam
    residual = rescaled.matvec(f) - lam * f
    exact_res = hminus1_exact(residual, rescaled, sigma)
    multi_res = multiscale_hminus1(residual, cloud, graph.epsilon, cfg.c_ms)
    h = make_rng(seed, 1).standard_normal(cloud.n)
    h -= h.mean()
    dual_h = hminus1_exact(h, rescaled, sigma)
    ratio_random = dual_h / multiscale_hminus1(h, cloud, graph.epsilon, cfg.c_ms)
    ratio_res = exact_res / multi_res if multi_res > 0 else 0.0
    violations = dual_pairing_violations(h, dual_h, graph, make_rng(seed, 2), PAIRING_TESTS)
    # ‖φ‖_{H̲⁻¹} = ‖φ‖ / √(σ_η λ_n) for the second graph eigenvector
    second = lanczos_smallest(rescaled, 2, tol=1e-10, max_iter=3000, seed=seed)[1]
    expected = l2_norm(second.vector) / math.sqrt(sigma * second.value)
    identity_err = abs(hminus1_exact(second.vector, rescaled, sigma) - expected) / expected
    eps = graph.epsilon
    return _row(
        n, eps, 0.0, exact_res, multi_res, ratio_res,
        aux1=ratio_random, aux2=eps**2 * math.log(1.0 / eps) * math.sqrt(lam),
        identity_err=identity_err, pairing_violations=violations,
        flagged=bool(identity_err > IDENTITY_TOL or violations),
    )


def extension_trial(cfg: ExperimentConfig, n: int, seed: int) -> dict:
    model, cloud, graph, _, level, pair = _spectral_pipeline(cfg, n, seed)
    lam = level[0].lam
    mc_seed = trial_seed(seed, n, 1)
    err = extension_h1_error(
        pair.vector, level, cloud, graph.epsilon, cfg.mc_points, mc_seed, kernel=graph.kernel
    )
    return _row(
        n, graph.epsilon, abs(pair.value - lam) / lam, err.l2_err, err.h1_err, err.l2_err + err.h1_err,
        aux1=err.coverage_miss_frac, aux2=err.h1_se, flagged=err.flagged,
    )


def _first_index(model, j: int) -> int:
    return 1 + sum(mult for _, mult in eigenvalue_levels(model, j))


def eigenspaces_trial(cfg: ExperimentConfig, x, seed: int) -> dict:
    n, j = int(x[0]), int(x[1])
    model, cloud, graph = _graph_for(cfg, n, seed)
    _, rescaled = graph_laplacian(graph)
    first = _first_index(model, j)
    level, _ = eigenspace(model, first)
    lam = level[0].lam
    pairs = lanczos_smallest(rescaled, first - 1 + len(level), seed=seed)[first - 1:]
    basis = [mode.eval(cloud.points) for mode in level]
    # each graph eigenvector against the whole restricted eigenspace
    residual = float(np.mean([subspace_residual(p.vector, basis) for p in pairs]))
    rel = float(np.mean([abs(p.value - lam) / lam for p in pairs]))
    return _row(
        n, graph.epsilon, rel, residual, 0.0, rel + residual,
        aux1=j, aux2=graph.epsilon * math.sqrt(lam),
    )


@lru_cache(maxsize=8)
def _reference_pairs(manifold: str, density: str, base_seed: int, grid_n: int, l: int):
    model = parse_manifold(manifold)
    rho = parse_density(density, model, base_seed)
    grid = PeriodicGrid(model.intrinsic_dim, grid_n)
    level, start = eigenspace(model, l)
    pairs = grid_eigenpairs(grid_operator(grid, rho), max(l, start - 1 + len(level)))
    return rho, grid, pairs


def plugin_trial(cfg: ExperimentConfig, n: int, seed: int) -> dict:
    rho, grid, ref = _reference_pairs(cfg.manifold, cfg.density, cfg.seed, cfg.grid_n, cfg.l)
    cloud = sample(rho, n, seed)
    est = plugin_estimate(cloud, cfg.l, grid, cfg.c_bw, seed=seed)
    lam_ref = ref[cfg.l - 1].value
    dist = eigenpair_metric(est.lam, est.f, lam_ref, level_block(ref, grid, cfg.l), grid)
    sup = float(np.max(np.abs(est.rho_hat - rho.evaluate(grid.points()))))
    return _row(
        n, est.bandwidth, dist.lambda_term / lam_ref, dist.l2_term, dist.h1_term, dist.metric,
        aux1=sup, aux2=grid.N,
    )


def lowerbound_trial(cfg: ExperimentConfig, m: int, seed: int) -> dict:
    model = parse_manifold(cfg.manifold)
    d = model.intrinsic_dim
    signs = sign_pattern("random", m**d, seed)
    rho1 = bump_density(m, signs, d=d)
    rho2 = bump_density(m, -signs, d=d)
    if not sufficiently_different(rho1.signs, rho2.signs):
        raise CapabilityError("sign vectors are not sufficiently different")
    grid = PeriodicGrid(d, cfg.grid_n)
    sep = eigenpair_separation(rho1, rho2, cfg.l, grid, seed=seed)
    kl = kl_divergence(rho1, rho2)
    chi2 = chi2_divergence(rho1, rho2)
    lam = eigenspace(model, cfg.l)[0][0].lam
    return _row(
        m, 0.0, sep.lambda_term / lam, sep.l2_term, sep.h1_term, sep.metric,
        aux1=kl, aux2=chi2, flagged=bool(kl > chi2),
    )


TRIALS = {
    "spectral": spectral_trial,
    "poisson": poisson_trial,
    "hminus1": hminus1_trial,
    "extension": extension_trial,
    "plugin": plugin_trial,
    "lowerbound": lowerbound_trial,
    "eigenspaces": eigenspaces_trial,
}


# -- execution ------------------------------------------------------------------------


def tasks_for(cfg: ExperimentConfig) -> list[tuple]:
    """``(x, trial, seed)`` for every trial of the study, in report order."""
    if cfg.study == "poisson":
        sizes = [(n, eps) for n in cfg.n_list for eps in (cfg.eps_list or (0.0,))]
    elif cfg.study == "lowerbound":
        sizes = list(cfg.m_list)
    elif cfg.study == "eigenspaces":
        sizes = [(n, j) for n in cfg.n_list for j in cfg.levels]
    else:
        sizes = list(cfg.n_list)
    return [(x, t, trial_seed(cfg.seed, x, t)) for x in sizes for t in range(cfg.trials)]


def _timed(study: str, cfg: ExperimentConfig, x, trial: int, seed: int):
    started = time.perf_counter()
    try:
        row = TRIALS[study](cfg, x, seed)
    except TRIAL_FAILURES as err:
        return None, f"{type(err).__name__}: {err}"
    row.update(trial=trial, seed=seed, wall_ms=int(1000 * (time.perf_counter() - started)))
    return row, None


def run_trials(cfg: ExperimentConfig) -> tuple[list[dict], int]:
    tasks = tasks_for(cfg)
    logger.info("%s study: %d trials with %d worker(s)", cfg.study, len(tasks), cfg.workers)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_timed, cfg.study, cfg, x, t, s) for x, t, s in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_timed(cfg.study, cfg, x, t, s) for x, t, s in tasks]
    rows, failures = [], 0
    for (x, t, s), (row, error) in zip(tasks, results):
        if row is None:
            failures += 1
            logger.warning("trial x=%s trial=%d seed=%d failed: %s", x, t, s, error)
        else:
            rows.append(row)
    if failures > MAX_FAILURE_FRACTION * len(tasks):
        raise StudyAbortedError(f"{failures} of {len(tasks)} trials failed")
    return rows, failures


def _report(cfg: ExperimentConfig, rows: list[dict], failures: int, started: float, **kwargs) -> ConvergenceReport:
    frame = pd.DataFrame(rows)
    flagged = int(frame.pop("flagged").sum()) if "flagged" in frame else 0
    frame.insert(0, "run_id", cfg.run_id)
    frame.insert(1, "study", cfg.study)
    report = ConvergenceReport(
        config=cfg, rows=frame, failures=failures, flagged=flagged,
        wall_seconds=time.perf_counter() - started, **kwargs,
    )
    for metric, fit in report.slopes().items():
        if fit is not None:
            logger.info("%s: slope %.3f (R² %.3f) for %s", cfg.study, fit["slope"], fit["r2"], metric)
    return report


def run_spectral(cfg: ExperimentConfig) -> ConvergenceReport:
    _require_uniform(cfg)
    started = time.perf_counter()
    rows, failures = run_trials(cfg)
    return _report(cfg, rows, failures, started)


def run_poisson(cfg: ExperimentConfig) -> ConvergenceReport:
    _require_uniform(cfg)
    started = time.perf_counter()
    rows, failures = run_trials(cfg)
    largest = max(cfg.n_list)
    return _report(cfg, rows, failures, started, x_column="eps", fit_subset={"n": largest})


def run_hminus1(cfg: ExperimentConfig) -> ConvergenceReport:
    _require_uniform(cfg)
    started = time.perf_counter()
    rows, failures = run_trials(cfg)
    bound = frozen_constant("C_frozen")
    violations = sum(1 for r in rows if not check_frozen("C_frozen", max(r["E_l"], r["aux1"])))
    extra = {
        "C_frozen": bound,
        "violations": violations,
        "identity_err_max": max((r["identity_err"] for r in rows), default=0.0),
        "pairing_violations": sum(r["pairing_violations"] for r in rows),
        "pairing_tests": PAIRING_TESTS * len(rows),
    }
    return _report(cfg, rows, failures, started, extra=extra)


def run_extension(cfg: ExperimentConfig) -> ConvergenceReport:
    _require_uniform(cfg)
    started = time.perf_counter()
    rows, failures = run_trials(cfg)
    return _report(cfg, rows, failures, started)


def run_plugin(cfg: ExperimentConfig) -> ConvergenceReport:
    model = parse_manifold(cfg.manifold)
    if not model.is_torus or model.intrinsic_dim > 2:
        raise CapabilityError("the plug-in study runs on T¹ or T²")
    started = time.perf_counter()
    rows, failures = run_trials(cfg)
    return _report(cfg, rows, failures, started)


def run_lowerbound(cfg: ExperimentConfig) -> ConvergenceReport:
    model = parse_manifold(cfg.manifold)
    if not model.is_torus or model.intrinsic_dim > 2:
        raise CapabilityError("the lower-bound family lives on T¹ or T²")
    started = time.perf_counter()
    rows, failures = run_trials(cfg)
    grid = PeriodicGrid(model.intrinsic_dim, cfg.grid_n)
    densities = [bump_density(m, sign_pattern("random", m**model.intrinsic_dim, cfg.seed), d=model.intrinsic_dim) for m in cfg.m_list]
    ratios = perturbation_ratios(densities, cfg.l, grid, seed=cfg.seed)
    pert = max(r.eigenvalue_ratio for r in ratios)
    pert_grad = max(r.gradient_ratio for r in ratios)
    extra = {
        "C_pert_observed": pert,
        "C_pert_grad_observed": pert_grad,
        "C_pert_ok": check_frozen("C_pert", pert),
        "C_pert_grad_ok": check_frozen("C_pert_grad", pert_grad),
    }
    return _report(cfg, rows, failures, started, x_column="n", extra=extra)


def run_eigenspaces(cfg: ExperimentConfig) -> ConvergenceReport:
    """Averaged errors per eigenspace, fitted per level against n and against ε."""
    _require_uniform(cfg)
    model = parse_manifold(cfg.manifold)
    top = max(cfg.levels)
    # fails early when the top level has no closed-form eigenfunctions
    eigenspace(model, _first_index(model, top))
    started = time.perf_counter()
    rows, failures = run_trials(cfg)
    report = _report(cfg, rows, failures, started, fit_subset={"aux1": top})
    metrics = ("lambda_rel_err", "l2_err")
    report.extra["levels"] = {
        str(j): {
            "lambda": eigenvalue_levels(model, j + 1)[j][0],
            "n": report.slopes(subset={"aux1": j}, metrics=metrics),
            "eps": report.slopes("eps", subset={"aux1": j}, metrics=metrics),
        }
        for j in sorted(set(cfg.levels))
    }
    return report


RUNNERS = {
    "spectral": run_spectral,
    "poisson": run_poisson,
    "hminus1": run_hminus1,
    "extension": run_extension,
    "plugin": run_plugin,
    "lowerbound": run_lowerbound,
    "eigenspaces": run_eigenspaces,
}


def run_study(cfg: ExperimentConfig) -> ConvergenceReport:
    return RUNNERS[cfg.study](cfg)


def replay(cfg: ExperimentConfig, seed: int) -> dict:
    """Re-run the single trial whose row carries ``seed``."""
    for x, trial, s in tasks_for(cfg):
        if s == seed:
            row, error = _timed(cfg.study, cfg, x, trial, s)
            if row is None:
                raise StudyAbortedError(f"replayed trial failed: {error}")
            row.pop("flagged", None)
            return {"run_id": cfg.run_id, "study": cfg.study, **row}
    raise CapabilityError(f"seed {seed} does not belong to any trial of this configuration")
