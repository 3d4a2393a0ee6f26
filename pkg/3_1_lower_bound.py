# %% [markdown]
# # Bump families
# Densities $\rho_c = 1 + m^{-2} \sum_k c_k\, b(m(x - x_k))$ with signs $c_k = \pm 1$ are
# hard to tell apart from samples: their KL divergence shrinks like $m^{-4}$ while
# their second eigenpairs separate only like $m^{-2}$.

# %%
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

from spectral_rates.config import ExperimentConfig
from spectral_rates.density import bump_density, chi2_divergence, kl_divergence, sign_pattern
from spectral_rates.log import setup_logging
from spectral_rates.pde import PeriodicGrid
from spectral_rates.studies import run_study

setup_logging("WARNING")

# %%
grid = PeriodicGrid(1, 1024)
x = grid.points()
fig, ax = plt.subplots(figsize=(6, 3))
for m in (4, 8):
    signs = sign_pattern("random", m, seed=m)
    ax.plot(x[:, 0], bump_density(m, signs).evaluate(x), label=f"m={m}")
ax.legend()
fig.tight_layout()

# %%
rows = []
for m in (4, 8, 16, 32):
    plus, minus = bump_density(m, np.ones(m)), bump_density(m, -np.ones(m))
    rows.append(dict(m=m, kl=kl_divergence(plus, minus), chi2=chi2_divergence(plus, minus)))
divergences = pd.DataFrame(rows)
divergences

# %%
ax = sns.lineplot(data=divergences.melt(id_vars="m"), x="m", y="value", hue="variable", marker="o")
ax.set(xscale="log", yscale="log")

# %% [markdown]
# ## Study
# `aux1` holds KL, `aux2` the $\chi^2$ bound and `E_l` the eigenpair separation.

# %%
cfg = ExperimentConfig(study="lowerbound", manifold="torus1", m_list=(4, 8, 16), trials=1, grid_n=1024)
report = run_study(cfg)
report.rows[["n", "E_l", "aux1", "aux2"]], report.fit("aux1"), report.fit("E_l")

# %%
report.extra
