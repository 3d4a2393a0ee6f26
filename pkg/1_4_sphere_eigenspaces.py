# %% [markdown]
# # Eigenspaces on the sphere
# On $S^2$ every level $\ell$ is $(2\ell+1)$-fold degenerate, so single eigenvectors
# are not comparable across samples. The `eigenspaces` study projects each graph
# eigenvector of a level onto the span of the restricted spherical harmonics and
# averages the residuals over the level.

# %%
import matplotlib.pyplot as plt
import seaborn as sns

from spectral_rates.config import ExperimentConfig
from spectral_rates.log import setup_logging
from spectral_rates.studies import run_study

setup_logging("WARNING")
plt.rcParams["pdf.fonttype"] = 42

# %%
cfg = ExperimentConfig(study="eigenspaces", manifold="sphere2", n_list=(1000, 2000, 4000), levels=(1, 2, 3), trials=2)
report = run_study(cfg)
rows = report.rows.rename(columns={"aux1": "level"})
rows.groupby(["level", "n"])[["eps", "lambda_rel_err", "l2_err"]].median()

# %% [markdown]
# Each level gets its own log-log fit, once against $n$ and once against $\varepsilon$.

# %%
{level: (fits["n"]["l2_err"], fits["eps"]["l2_err"]) for level, fits in report.extra["levels"].items()}

# %%
fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
for ax, x in zip(axes, ("n", "eps")):
    sns.lineplot(data=rows, x=x, y="l2_err", hue="level", estimator="median", marker="o", ax=ax)
    ax.set(xscale="log", yscale="log")
axes[0].set_ylabel("eigenspace residual")
fig.tight_layout()
