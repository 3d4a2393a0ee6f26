"""Logging setup shared by the CLI and the notebooks."""

from __future__ import annotations

import logging
import os
import sys

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str | int | None = None) -> None:
    """Attach one stream handler to the package logger.

    ``level`` falls back to the ``SPECTRAL_RATES_LOG`` environment variable,
    then INFO. Calling it twice replaces the handler instead of stacking.
    """
    if level is None:
        level = os.environ.get("SPECTRAL_RATES_LOG", "INFO")
    if isinstance(level, str):
        level = level.upper()
    logger = logging.getLogger("spectral_rates")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
