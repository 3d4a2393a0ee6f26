# %% [markdown]
# # Extension to the manifold
# A graph eigenvector only lives on the samples. The kernel extension
# $\Lambda_r u(x) = \sum_i \psi(|x - x_i|/r) u_i / \sum_i \psi(|x - x_i|/r)$
# turns it into a smooth function whose $H^1$ error can be estimated by Monte Carlo.

# %%
import matplotlib.pyplot as plt
import numpy as np

from spectral_rates.config import ExperimentConfig
from spectral_rates.extension import ExtensionKernel, extend, psi_eval
from spectral_rates.geometry import make_manifold, sample_uniform
from spectral_rates.graph import make_kernel
from spectral_rates.log import setup_logging
from spectral_rates.studies import run_study

setup_logging("WARNING")

# %% [markdown]
# ## The extension profile

# %%
t = np.linspace(0, 1.2, 200)
fig, ax = plt.subplots(figsize=(5, 3))
for name in ("tent", "smoothstep"):
    ax.plot(t, psi_eval(ExtensionKernel(make_kernel(name), 1.0), t), label=name)
ax.set(xlabel="t", ylabel="ψ(t)")
ax.legend()
fig.tight_layout()

# %% [markdown]
# ## A noisy function on a circle

# %%
circle = make_manifold("torus", 1)
cloud = sample_uniform(circle, 400, seed=2)
u = np.sin(2 * np.pi * cloud.points[:, 0]) + 0.3 * np.random.default_rng(3).standard_normal(cloud.n)
x = np.linspace(0, 1, 500, endpoint=False)
fig, ax = plt.subplots(figsize=(6, 3))
ax.plot(cloud.points[:, 0], u, ".", color=".6", label="samples")
for r in (0.02, 0.08):
    ax.plot(x, extend(u, cloud, r, x[:, None]), label=f"r={r}")
ax.legend()
fig.tight_layout()

# %% [markdown]
# ## Study
# `aux1` is the fraction of Monte Carlo points without a sample within $r$.

# %%
cfg = ExperimentConfig(study="extension", n_list=(1000, 2000, 4000), trials=2, mc_points=10_000)
report = run_study(cfg)
report.rows[["n", "eps", "l2_err", "h1_err", "aux1"]]

# %%
report.fit("h1_err")
