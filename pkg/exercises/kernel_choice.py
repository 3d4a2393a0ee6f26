# %% [markdown]
# # Kernel choice
# The graph weights come from a radial profile $\eta$: the `tent` profile $1 - t$
# or the `smoothstep` profile $1 - 3t^2 + 2t^3$ on $[0, 1]$.
# The rescaling $2/\sigma_\eta$ is supposed to make the eigenvalues comparable.
#
# Run the spectral study for both kernels on the circle and compare the errors.
# Which kernel has the smaller eigenvalue error at the same ε? Does the slope change?

# %%
import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

from spectral_rates.config import ExperimentConfig
from spectral_rates.graph import kernel_moments, make_kernel
from spectral_rates.log import setup_logging
from spectral_rates.studies import run_study

setup_logging("WARNING")

# %% [markdown]
# The moments that enter the rescaling:

# %%
pd.DataFrame(
    [(name, d, *kernel_moments(make_kernel(name), d)) for name in ("tent", "smoothstep") for d in (1, 2)],
    columns=["kernel", "d", "mass", "sigma"],
)

# %% [markdown]
# Start from this configuration and change the kernel:

# %%
cfg = ExperimentConfig(manifold="torus1", n_list=(250, 500, 1000, 2000), trials=3, kernel="tent")
report = run_study(cfg)
report.medians("lambda_rel_err")

# %% [markdown]
# <details>
# <summary>Show code of one possible solution</summary>
#
# ```python
# frames = []
# for kernel in ("tent", "smoothstep"):
#     cfg = ExperimentConfig(manifold="torus1", n_list=(250, 500, 1000, 2000), trials=3, kernel=kernel)
#     frames.append(run_study(cfg).rows.assign(kernel=kernel))
# rows = pd.concat(frames)
#
# fig, ax = plt.subplots(figsize=(6, 4))
# sns.lineplot(data=rows, x="n", y="lambda_rel_err", hue="kernel", estimator="median", marker="o", ax=ax)
# ax.set(xscale="log", yscale="log", ylabel="relative eigenvalue error")
# fig.tight_layout()
# ```
#
# </details>
