"""Graph Laplacian eigenpair estimation on sampled manifolds, at desk scale.

Modules follow the pipeline of a study: sample points on a manifold
(:mod:`~spectral_rates.geometry`, :mod:`~spectral_rates.density`), build the
proximity graph (:mod:`~spectral_rates.graph`), solve
(:mod:`~spectral_rates.linalg`, :mod:`~spectral_rates.pde`), measure
(:mod:`~spectral_rates.norms`, :mod:`~spectral_rates.extension`) and report
(:mod:`~spectral_rates.studies`, :mod:`~spectral_rates.report`).
"""

__version__ = "0.1.0"
