"""Frozen regression constants.

The table ships with the package; ``data/calibrate_constants.py`` regenerates
it from seeded calibration runs.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from importlib import resources

import pandas as pd

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

TABLE = "frozen_constants.csv"


@lru_cache(maxsize=1)
def frozen_constants() -> pd.DataFrame:
    with resources.files("spectral_rates").joinpath(TABLE).open("r", encoding="utf-8") as fh:
        return pd.read_csv(fh, index_col="name")


def frozen_constant(name: str) -> float:
    table = frozen_constants()
    if name not in table.index:
        raise ConfigurationError(f"no frozen constant named {name!r}; known: {sorted(table.index)}")
    return float(table.loc[name, "value"])


def check_frozen(name: str, observed: float) -> bool:
    """True if ``observed`` stays within the frozen constant; warns otherwise."""
    bound = frozen_constant(name)
    if observed > bound:
        logger.warning("%s exceeded: observed %.4g > frozen %.4g", name, observed, bound)
        return False
    return True
