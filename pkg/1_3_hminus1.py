# %% [markdown]
# # Dual norms
# The discrete $H^{-1}$ norm of a mean-zero $h$ needs a Laplacian solve.
# The multiscale estimate only averages $h$ over nested cubes of side $3^{p-m}$
# and should dominate it up to a fixed constant.

# %%
import numpy as np
import pandas as pd
import seaborn as sns

from spectral_rates.calibration import frozen_constants
from spectral_rates.geometry import make_manifold, sample_uniform
from spectral_rates.graph import build_graph, graph_laplacian, kernel_moments, make_kernel
from spectral_rates.norms import CubeHierarchy, hminus1_exact, multiscale_hminus1

# %%
cloud = sample_uniform(make_manifold("torus", 2), 2000, seed=0)
eps = 0.25
graph = build_graph(cloud, eps, make_kernel("tent"))
_, laplacian = graph_laplacian(graph)
_, sigma = kernel_moments(graph.kernel, graph.d)
hierarchy = CubeHierarchy(cloud, eps)
hierarchy.m, [hierarchy.n_cells(p) for p in hierarchy.levels]

# %% [markdown]
# Random noise and a smooth mode behave differently: noise has a small dual norm
# compared to its size, a smooth function does not.

# %%
rng = np.random.default_rng(1)
rows = []
for i in range(20):
    noise = rng.standard_normal(cloud.n)
    smooth = np.cos(2 * np.pi * (cloud.points[:, 0] + rng.uniform()))
    for kind, h in (("noise", noise - noise.mean()), ("smooth", smooth - smooth.mean())):
        exact = hminus1_exact(h, laplacian, sigma)
        rows.append(dict(kind=kind, exact=exact, multiscale=multiscale_hminus1(h, cloud, eps, hierarchy=hierarchy)))
ratios = pd.DataFrame(rows).assign(ratio=lambda x: x["exact"] / x["multiscale"])
ratios.groupby("kind")["ratio"].describe()

# %%
ax = sns.stripplot(data=ratios, x="kind", y="ratio")
ax.axhline(frozen_constants().loc["C_frozen", "value"], color=".5", linestyle="--")

# %% [markdown]
# The dashed line is the frozen constant used by the `hminus1` study.
