# %% [markdown]
# # Plug-in estimator
# Instead of a graph, estimate the density with a wrapped Gaussian kernel and solve
# the weighted eigenvalue problem $-\operatorname{div}(\rho^2 \nabla f) = \lambda \rho f$
# with finite differences on a periodic grid.

# %%
import matplotlib.pyplot as plt
import numpy as np

from spectral_rates.config import ExperimentConfig
from spectral_rates.density import bump_density, sample
from spectral_rates.log import setup_logging
from spectral_rates.pde import PeriodicGrid, grid_eigenpairs, grid_operator, plugin_estimate
from spectral_rates.studies import run_study

setup_logging("WARNING")

# %%
grid = PeriodicGrid(1, 512)
rho = bump_density(4, [1, -1, 1, -1])
reference = grid_eigenpairs(grid_operator(grid, rho), 3)
samples = sample(rho, 8000, seed=0)
estimate = plugin_estimate(samples, 2, grid, c_bw=0.5)
estimate.lam, reference[1].value

# %%
x = grid.points()[:, 0]
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3))
ax1.plot(x, rho.evaluate(grid.points()), label="ρ")
ax1.plot(x, estimate.rho_hat, label="KDE")
ax1.legend()
sign = np.sign(np.sum(estimate.f * reference[1].vector))
ax2.plot(x, reference[1].vector, label="reference")
ax2.plot(x, sign * estimate.f, label="plug-in")
ax2.legend()
fig.tight_layout()

# %% [markdown]
# The second level of the circle is two dimensional, so the comparison above only
# works up to a rotation within that level; the study uses the projection onto the
# reference block instead.

# %%
cfg = ExperimentConfig(study="plugin", manifold="torus1", n_list=(1000, 2000, 4000, 8000), trials=2, grid_n=256)
report = run_study(cfg)
report.medians("E_l"), report.fit("E_l")
