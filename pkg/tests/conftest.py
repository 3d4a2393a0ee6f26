import logging

import pytest

from spectral_rates.geometry import make_manifold, sample_uniform
from spectral_rates.graph import build_graph, graph_laplacian, make_kernel


@pytest.fixture(scope="module")
def torus2():
    return make_manifold("torus", 2)


@pytest.fixture(scope="module")
def sphere():
    return make_manifold("sphere2")


@pytest.fixture(scope="module")
def small_graph(torus2):
    """Connected tent-kernel graph on 400 uniform torus points."""
    cloud = sample_uniform(torus2, 400, seed=7)
    return build_graph(cloud, 0.2, make_kernel("tent"))


@pytest.fixture(scope="module")
def small_laplacians(small_graph):
    return graph_laplacian(small_graph)


@pytest.fixture(autouse=True)
def _package_logger_propagates():
    """Undo ``setup_logging`` so caplog sees package records in every test."""
    yield
    logger = logging.getLogger("spectral_rates")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
