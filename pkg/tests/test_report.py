import json
import math

import numpy as np
import pandas as pd
import pytest

from spectral_rates.config import ExperimentConfig
from spectral_rates.errors import DomainError
from spectral_rates.report import CSV_COLUMNS, ConvergenceReport, count_inversions, fit_loglog, write_atomic


def test_fit_loglog_exact_power():
    xs = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    fit = fit_loglog(xs, xs**2)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)

    flat = fit_loglog(xs, np.full(5, 3.0))
    assert flat.slope == pytest.approx(0.0, abs=1e-12)
    assert flat.intercept == pytest.approx(math.log(3.0))


def test_fit_loglog_noisy():
    rng = np.random.default_rng(0)
    xs = np.geomspace(1e3, 1.28e5, 8)
    ys = 3 * xs ** (-1 / 3) * (1 + 0.01 * rng.standard_normal(8))
    fit = fit_loglog(xs, ys)
    assert fit.slope == pytest.approx(-1 / 3, abs=0.05)
    assert 0.9 <= fit.r2 <= 1.0


@pytest.mark.parametrize(
    "xs, ys",
    [
        ([1, 2], [1, 2]),
        ([1, 2, 3], [1, 0, 2]),
        ([1, -2, 3], [1, 2, 3]),
        ([1, 2, 3], [1, 2]),
    ],
)
def test_fit_loglog_rejects_bad_input(xs, ys):
    with pytest.raises(DomainError):
        fit_loglog(xs, ys)


def test_count_inversions():
    assert count_inversions([5, 4, 6, 3]) == 1
    assert count_inversions([3, 2, 1]) == 0
    assert count_inversions([]) == 0


def _rows(ns, trials, rate=-0.5):
    rows = []
    for n in ns:
        for t in range(trials):
            err = n**rate * (1 + 0.1 * t)
            rows.append(
                dict(
                    run_id="abc", study="spectral", n=n, eps=0.1, trial=t, seed=t,
                    lambda_rel_err=err, l2_err=err, h1_err=err, E_l=3 * err, aux1=0.0, aux2=float("nan"), wall_ms=1,
                )
            )
    return pd.DataFrame(rows)


def test_report_aggregates_and_fits():
    cfg = ExperimentConfig(n_list=(100, 400, 1600), trials=3)
    report = ConvergenceReport(cfg, _rows(cfg.n_list, 3))
    assert list(report.rows.columns) == CSV_COLUMNS
    agg = report.aggregates()
    assert list(agg.index) == [100, 400, 1600]
    assert agg.loc[100, ("E_l", "median")] == pytest.approx(3 * 100**-0.5 * 1.1)
    fit = report.fit("lambda_rel_err")
    assert fit.slope == pytest.approx(-0.5)
    # zeros and NaNs are not fitted
    assert report.fit("aux1") is None
    assert report.slopes()["aux2"] is None


def test_fit_subset_restricts_rows():
    frame = pd.concat([_rows([100, 400, 1600], 1, rate=-1.0).assign(eps=0.2), _rows([100, 400, 1600], 1).assign(eps=0.1)])
    cfg = ExperimentConfig(n_list=(100, 400, 1600), trials=1)
    report = ConvergenceReport(cfg, frame, fit_subset={"eps": 0.2})
    assert report.fit("l2_err").slope == pytest.approx(-1.0)
    assert len(report.medians("l2_err")) == 3


def test_too_few_sizes_give_no_fit():
    cfg = ExperimentConfig(n_list=(100, 400), trials=2)
    report = ConvergenceReport(cfg, _rows(cfg.n_list, 2))
    assert report.fit("E_l") is None


def test_write(tmp_path):
    cfg = ExperimentConfig(n_list=(100, 400, 1600), trials=2, out_dir=str(tmp_path / "out"))
    report = ConvergenceReport(cfg, _rows(cfg.n_list, 2), failures=1, extra={"C_frozen": np.float64(2.0)})
    csv_path, json_path = report.write()
    assert csv_path.name == f"spectral_{cfg.run_id}.csv"
    assert json_path.name == f"spectral_{cfg.run_id}.json"
    assert not list(csv_path.parent.glob("*.tmp"))

    frame = pd.read_csv(csv_path)
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == 6
    summary = json.loads(json_path.read_text())
    assert summary["failures"] == 1
    assert summary["rows"] == 6
    assert summary["extra"] == {"C_frozen": 2.0}
    assert summary["fits"]["lambda_rel_err"]["slope"] == pytest.approx(-0.5)
    assert summary["aggregates"]["100"]["aux2_median"] is None
    assert summary["config"]["n_list"] == [100, 400, 1600]

    # same report, same bytes
    again, _ = report.write(tmp_path / "again")
    assert again.read_bytes() == csv_path.read_bytes()


def test_write_atomic_replaces(tmp_path):
    path = tmp_path / "nested" / "file.txt"
    write_atomic(path, "first")
    write_atomic(path, "second")
    assert path.read_text() == "second"
    assert [p.name for p in path.parent.iterdir()] == ["file.txt"]
