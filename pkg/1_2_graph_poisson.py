# %% [markdown]
# # Graph Poisson problem
# Solve $\mathcal{L} u = f - \bar f$ on the graph with
# $f = 4\pi^2 \sqrt{2}\cos(2\pi x_1)$, whose continuum solution is
# $\bar u = \sqrt{2}\cos(2\pi x_1)$, and look at the error as a function of ε.

# %%
import matplotlib.pyplot as plt
import seaborn as sns

from spectral_rates.config import ExperimentConfig
from spectral_rates.log import setup_logging
from spectral_rates.studies import run_study

setup_logging("WARNING")

# %%
cfg = ExperimentConfig(study="poisson", n_list=(4000,), eps_list=(0.2, 0.25, 0.32, 0.4), trials=2, seed=0)
report = run_study(cfg)
report.rows[["n", "eps", "l2_err", "h1_err", "aux1", "aux2"]]

# %% [markdown]
# `aux1` is the relative residual of the solver, `aux2` the number of iterations.
# The fit uses ε on the x axis and only the largest n.

# %%
report.fit("h1_err")

# %%
fig, ax = plt.subplots(figsize=(5, 4))
sns.scatterplot(data=report.rows, x="eps", y="h1_err", ax=ax)
ax.set(xscale="log", yscale="log", xlabel="ε", ylabel="$H^1$ error")
fig.tight_layout()
