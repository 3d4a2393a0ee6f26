"""Study reports: trial rows, per-size aggregates, log-log fits and output files."""

from __future__ import annotations

import json
import logging
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from . import __version__
from .config import ExperimentConfig
from .errors import DomainError

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "run_id",
    "study",
    "n",
    "eps",
    "trial",
    "seed",
    "lambda_rel_err",
    "l2_err",
    "h1_err",
    "E_l",
    "aux1",
    "aux2",
    "wall_ms",
]
METRICS = ["lambda_rel_err", "l2_err", "h1_err", "E_l", "aux1", "aux2"]


class LogLogFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def fit_loglog(xs, ys) -> LogLogFit:
    """Least squares line through ``(log x, log y)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DomainError("fit_loglog needs two 1-d arrays of equal length")
    if len(xs) < 3:
        raise DomainError(f"fit_loglog needs at least 3 points, got {len(xs)}")
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(xs * ys)):
        raise DomainError("fit_loglog needs finite positive values")
    lx = np.log(xs).reshape(-1, 1)
    ly = np.log(ys)
    model = LinearRegression().fit(lx, ly)
    r2 = float(r2_score(ly, model.predict(lx)))
    return LogLogFit(float(model.coef_[0]), float(model.intercept_), min(max(r2, 0.0), 1.0))


def count_inversions(values) -> int:
    """Number of consecutive increases in a sequence expected to decrease."""
    values = list(values)
    return sum(1 for a, b in zip(values, values[1:]) if b > a)


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    rows: pd.DataFrame
    x_column: str = "n"
    failures: int = 0
    flagged: int = 0
    wall_seconds: float = 0.0
    extra: dict = field(default_factory=dict)
    fit_subset: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = self.rows.reindex(columns=CSV_COLUMNS)

    @property
    def run_id(self) -> str:
        return self.config.run_id

    def aggregates(self) -> pd.DataFrame:
        """Median and mean of every metric per value of ``x_column``."""
        if self.rows.empty:
            return pd.DataFrame()
        return self.rows.groupby(self.x_column)[METRICS].agg(["median", "mean"])

    def medians(self, metric: str, x_column: str | None = None, subset: dict | None = None) -> pd.Series:
        """Per-x medians over the rows matching ``subset`` (default ``fit_subset``)."""
        rows = self.rows
        for column, value in (self.fit_subset if subset is None else subset).items():
            rows = rows[rows[column] == value]
        return rows.groupby(x_column or self.x_column)[metric].median()

    def fit(self, metric: str, x_column: str | None = None, subset: dict | None = None) -> LogLogFit | None:
        med = self.medians(metric, x_column, subset)
        med = med[(med > 0) & np.isfinite(med)]
        if len(med) < 3 or med.index.to_series().le(0).any():
            return None
        return fit_loglog(med.index.to_numpy(dtype=float), med.to_numpy(dtype=float))

    def slopes(self, x_column: str | None = None, subset: dict | None = None, metrics=METRICS) -> dict:
        out = {}
        for metric in metrics:
            result = self.fit(metric, x_column, subset)
            out[metric] = None if result is None else result._asdict()
        return out

    def summary(self) -> dict:
        agg = self.aggregates()
        per_x = {}
        if not agg.empty:
            for x, row in agg.iterrows():
                per_x[str(x)] = {f"{metric}_{stat}": _clean(row[(metric, stat)]) for metric, stat in agg.columns}
        return {
            "run_id": self.run_id,
            "study": self.config.study,
            "config": self.config.echo(),
            "x_column": self.x_column,
            "fit_subset": self.fit_subset,
            "aggregates": per_x,
            "fits": self.slopes(),
            "eps_fits": None if self.x_column == "eps" else self.slopes("eps"),
            "rows": int(len(self.rows)),
            "failures": self.failures,
            "flagged": self.flagged,
            "extra": {k: _clean(v) for k, v in self.extra.items()},
            "version": __version__,
            "python": platform.python_version(),
            "wall_seconds": round(self.wall_seconds, 3),
        }

    def csv_text(self) -> str:
        return self.rows.to_csv(index=False, float_format="%.12g", lineterminator="\n")

    def write(self, out_dir: str | Path | None = None) -> tuple[Path, Path]:
        out_dir = Path(out_dir or self.config.out_dir)
        stem = f"{self.config.study}_{self.run_id}"
        csv_path = out_dir / f"{stem}.csv"
        json_path = out_dir / f"{stem}.json"
        write_atomic(csv_path, self.csv_text())
        write_atomic(json_path, json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        logger.info("wrote %s and %s", csv_path, json_path)
        return csv_path, json_path


def _clean(value):
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def write_atomic(path: Path, text: str) -> None:
    """Write to a temporary sibling, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)
