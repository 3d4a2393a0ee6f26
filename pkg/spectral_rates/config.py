"""Experiment configuration: defaults, ``key = value`` files and CLI overrides."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigurationError
from .geometry import parse_manifold
from .graph import PROFILES, epsilon_for

logger = logging.getLogger(__name__)

STUDIES = ("spectral", "poisson", "extension", "hminus1", "plugin", "lowerbound", "eigenspaces")

# studies whose graphs use the configured length scale
GRAPH_STUDIES = ("spectral", "poisson", "extension", "hminus1", "eigenspaces")

# c_eps such that the mean degree is at least 30 at n = 1000
DEFAULT_EPS_CONST = {"torus1": 0.5, "torus2": 0.5, "torus3": 0.6, "sphere2": 2.0}

# fields that do not change the numbers in a report
RUNTIME_FIELDS = ("out_dir", "workers", "log_level")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(float(v)) for v in text.split(",") if v.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _optional_float(text: str):
    text = text.strip().lower()
    return None if text in ("", "none", "default") else float(text)


_PARSERS = {
    "study": str.strip,
    "manifold": str.strip,
    "density": str.strip,
    "kernel": str.strip,
    "l": int,
    "n_list": _ints,
    "trials": int,
    "eps_const": _optional_float,
    "epsilon": _optional_float,
    "seed": int,
    "mc_points": int,
    "out_dir": str.strip,
    "eps_list": _floats,
    "m_list": _ints,
    "levels": _ints,
    "grid_n": int,
    "c_bw": float,
    "c_ms": float,
    "workers": int,
    "log_level": str.strip,
}


@dataclass(frozen=True)
class ExperimentConfig:
    study: str = "spectral"
    manifold: str = "torus2"
    density: str = "uniform"
    kernel: str = "tent"
    l: int = 2
    n_list: tuple[int, ...] = (1000, 2000, 4000)
    trials: int = 3
    eps_const: float | None = None
    epsilon: float | None = None
    seed: int = 0
    mc_points: int = 50_000
    out_dir: str = "results"
    eps_list: tuple[float, ...] = ()
    m_list: tuple[int, ...] = (4, 8, 16)
    levels: tuple[int, ...] = (1, 2, 3)
    grid_n: int = 1024
    c_bw: float = 0.5
    c_ms: float = 1.0
    workers: int = 1
    log_level: str | None = None

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigurationError(f"unknown study {self.study!r}; choose from {STUDIES}")
        parse_manifold(self.manifold)
        if self.kernel not in PROFILES:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")
        if not self.n_list:
            raise ConfigurationError("n_list must not be empty")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigurationError(f"n_list must be strictly increasing, got {self.n_list}")
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if self.l < 1:
            raise ConfigurationError("l is 1-based")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if self.eps_const is not None and self.eps_const <= 0:
            raise ConfigurationError("eps_const must be positive")
        if not self.levels or min(self.levels) < 1:
            raise ConfigurationError("levels are 1-based indices of nonzero eigenvalues")
        self._check_length_scales()

    def _check_length_scales(self):
        if self.study not in GRAPH_STUDIES:
            return
        model = parse_manifold(self.manifold)
        limit = model.max_epsilon
        if self.study == "poisson" and self.eps_list:
            scales = {f"eps_list entry {e}": e for e in self.eps_list}
        elif self.epsilon is not None:
            scales = {"epsilon": self.epsilon}
        else:
            # ε decreases with n, so the smallest n gives the largest scale
            n = min(self.n_list)
            eps = epsilon_for(n, model.intrinsic_dim, self.epsilon_constant)
            scales = {f"default epsilon at n={n} ({eps:.3g})": eps}
        for label, eps in scales.items():
            if not 0.0 < eps < limit:
                raise ConfigurationError(f"{label} is outside (0, {limit}) on {self.manifold}")

    @property
    def epsilon_constant(self) -> float:
        if self.eps_const is not None:
            return self.eps_const
        return DEFAULT_EPS_CONST[self.manifold]

    def echo(self) -> dict:
        """Plain dictionary of every field with the resolved ε constant."""
        out = asdict(self)
        out["eps_const"] = self.epsilon_constant
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    @property
    def run_id(self) -> str:
        science = {k: v for k, v in self.echo().items() if k not in RUNTIME_FIELDS}
        payload = json.dumps(science, sort_keys=True, separators=(",", ":"))
        return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]


def parse_config_text(text: str) -> dict:
    values = {}
    known = {f.name for f in fields(ExperimentConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as err:
            raise ConfigurationError(f"line {lineno}: bad value for {key}: {value!r}") from err
    return values


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then non-``None`` overrides."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file {path} does not exist")
        values.update(parse_config_text(path.read_text(encoding="utf-8")))
    known = {f.name for f in fields(ExperimentConfig)}
    for key, value in overrides.items():
        if key not in known:
            raise ConfigurationError(f"unknown override {key!r}")
        if value is not None:
            values[key] = value
    cfg = ExperimentConfig(**values)
    logger.debug("config %s: %s", cfg.run_id, cfg.echo())
    return cfg


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
