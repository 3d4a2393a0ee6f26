import io
import logging

import pandas as pd
import pytest

from spectral_rates import __version__
from spectral_rates.cli import build_parser, main
from spectral_rates.log import setup_logging
from spectral_rates.report import CSV_COLUMNS

SMALL_RUN = ["run", "--study", "spectral", "--manifold", "torus1", "--n", "200,400,800", "--trials", "1", "--seed", "3"]


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_parser_overrides():
    args = build_parser().parse_args(["run", "--n", "1000,2000,4e3", "--eps-const", "0.4", "--out", "x"])
    assert args.n_list == (1000, 2000, 4000)
    assert args.eps_const == 0.4
    assert args.out_dir == "x"
    assert args.study is None
    args = build_parser().parse_args(["run", "--study", "eigenspaces", "--levels", "1,3", "--epsilon", "0.25"])
    assert args.levels == (1, 3)
    assert args.epsilon == 0.25


def test_run_and_replay(tmp_path, capsys):
    assert main(SMALL_RUN + ["--out", str(tmp_path)]) == 0
    csv_path, json_path = capsys.readouterr().out.split()
    assert csv_path.startswith(str(tmp_path)) and json_path.endswith(".json")
    frame = pd.read_csv(csv_path, dtype={"run_id": str})
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == 3

    row = frame.iloc[1]
    assert main(SMALL_RUN + ["--replay", str(row.seed)]) == 0
    replayed = pd.read_csv(io.StringIO(capsys.readouterr().out), dtype={"run_id": str})
    assert list(replayed.columns) == CSV_COLUMNS
    pd.testing.assert_series_equal(
        replayed.iloc[0].drop("wall_ms"), row.drop("wall_ms"), check_names=False
    )


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"study = spectral\nmanifold = torus1\nn_list = 200, 400, 800\ntrials = 1\nout_dir = {tmp_path / 'out'}\n")
    assert main(["run", "--config", str(cfg)]) == 0
    csv_path, _ = capsys.readouterr().out.split()
    assert str(tmp_path / "out") in csv_path


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--config", "does-not-exist.cfg"],
        ["run", "--study", "spectral", "--density", "bump:2:plus", "--manifold", "torus1"],
        ["run", "--n", "400,200"],
        ["run", "--manifold", "sphere2", "--n", "300,600"],
        ["run", "--study", "eigenspaces", "--manifold", "sphere2", "--levels", "4"],
        SMALL_RUN + ["--replay", "7"],
    ],
)
def test_errors_exit_with_status_two(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert not list(tmp_path.iterdir())


def test_setup_logging(monkeypatch):
    monkeypatch.setenv("SPECTRAL_RATES_LOG", "debug")
    setup_logging()
    logger = logging.getLogger("spectral_rates")
    assert logger.level == logging.DEBUG
    setup_logging("warning")
    assert len(logger.handlers) == 1
    assert logger.level == logging.WARNING
