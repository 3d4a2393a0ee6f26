# %% [markdown]
# # Spectral convergence
# - sample n points uniformly on the flat torus $\mathbb{T}^2$
# - connect points closer than $\varepsilon_n = c\,(\ln n / n)^{1/6}$ with tent weights
# - compare the second eigenpair of the rescaled graph Laplacian with $\lambda_2 = 4\pi^2$
#
# The error is expected to decay roughly like $n^{-1/3}$ (up to logarithms).

# %%
import matplotlib as mpl
import matplotlib.pyplot as plt
import numpy as np
import seaborn as sns

from spectral_rates.config import ExperimentConfig
from spectral_rates.geometry import make_manifold, sample_uniform
from spectral_rates.graph import build_graph, default_epsilon, graph_laplacian, make_kernel
from spectral_rates.linalg import lanczos_smallest
from spectral_rates.log import setup_logging
from spectral_rates.studies import run_study

setup_logging("WARNING")
mpl.rcParams["pdf.fonttype"] = 42

# %% [markdown]
# ## One graph
# The summary shows how many neighbours the default ε gives.

# %%
torus = make_manifold("torus", 2)
n = 2000
cloud = sample_uniform(torus, n, seed=0)
graph = build_graph(cloud, default_epsilon(n, 2, 0.5), make_kernel("tent"))
graph.summary()

# %%
_, laplacian = graph_laplacian(graph)
pairs = lanczos_smallest(laplacian, 9)
values = np.array([p.value for p in pairs])
values / (4 * np.pi**2)

# %% [markdown]
# The first nonzero level has multiplicity four (two sines, two cosines), the next
# one starts at $8\pi^2$.

# %%
fig, ax = plt.subplots(figsize=(6, 3))
ax.plot(values, "o")
ax.axhline(4 * np.pi**2, color=".5", linestyle="--", label="$4\\pi^2$")
ax.axhline(8 * np.pi**2, color=".7", linestyle=":", label="$8\\pi^2$")
ax.set(xlabel="index", ylabel="eigenvalue")
ax.legend()
fig.tight_layout()

# %% [markdown]
# ## A small study
# The acceptance run in `data/configs/spectral_t2.cfg` goes to n = 16000 with ten
# trials; here we keep it short.

# %%
cfg = ExperimentConfig(n_list=(500, 1000, 2000, 4000), trials=3, seed=0)
report = run_study(cfg)
report.rows

# %%
report.slopes()

# %%
long = report.rows.melt(
    id_vars=["n", "trial"],
    value_vars=["lambda_rel_err", "l2_err", "h1_err"],
    var_name="error",
)
ax = sns.lineplot(data=long, x="n", y="value", hue="error", marker="o", estimator="median", errorbar=("pi", 50))
ax.set(xscale="log", yscale="log", xlabel="n", ylabel="median error")
ax.get_figure().tight_layout()

# %% [markdown]
# The `aux1` column holds $\langle \varphi, \mathcal{L} f - \lambda f\rangle / \langle \varphi, f\rangle$
# which has to agree with $\lambda_{n} - \lambda$ for an exact graph eigenvector.

# %%
(report.rows["aux1"].abs() / (4 * np.pi**2) - report.rows["lambda_rel_err"]).abs().max()
