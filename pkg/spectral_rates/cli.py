"""``spectral-rates`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

import pandas as pd

from . import __version__
from .config import STUDIES, load_config
from .errors import SpectralRatesError
from .log import setup_logging
from .report import CSV_COLUMNS
from .studies import replay, run_study

logger = logging.getLogger(__name__)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(float(v)) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral-rates",
        description="Convergence-rate studies for graph Laplacians on point clouds.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one study and write its CSV and JSON report")
    run.add_argument("--config", help="key = value configuration file")
    run.add_argument("--study", choices=STUDIES)
    run.add_argument("--manifold", help="torus1, torus2, torus3 or sphere2")
    run.add_argument("--density", help="uniform or bump:<m>:<pattern>")
    run.add_argument("--kernel", help="tent or smoothstep")
    run.add_argument("--l", type=int, help="eigenpair index (1-based)")
    run.add_argument("--n", type=_int_list, dest="n_list", help="comma separated sample sizes")
    run.add_argument("--trials", type=int)
    run.add_argument("--eps-const", type=float, dest="eps_const")
    run.add_argument("--epsilon", type=float, help="fixed graph length scale instead of the default rule")
    run.add_argument("--levels", type=_int_list, help="comma separated eigenspace levels (eigenspaces study)")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", dest="out_dir")
    run.add_argument("--workers", type=int)
    run.add_argument("--log-level", dest="log_level")
    run.add_argument("--replay", type=int, metavar="SEED", help="re-run the trial whose row carries SEED")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key)
        for key in (
            "study", "manifold", "density", "kernel", "l", "n_list", "trials",
            "eps_const", "epsilon", "levels", "seed", "out_dir", "workers", "log_level",
        )
    }
    setup_logging(args.log_level)
    try:
        cfg = load_config(args.config, **overrides)
        setup_logging(args.log_level or cfg.log_level)
        if args.replay is not None:
            row = replay(cfg, args.replay)
            frame = pd.DataFrame([row]).reindex(columns=CSV_COLUMNS)
            sys.stdout.write(frame.to_csv(index=False, float_format="%.12g", lineterminator="\n"))
            return 0
        report = run_study(cfg)
        csv_path, json_path = report.write()
    except SpectralRatesError as err:
        logger.error("%s", err)
        return 2
    print(csv_path)
    print(json_path)
    return 0
