"""
Distribution of the entanglement-entropy rate under diffusive monitoring
========================================================================

Under continuous weak measurement the half-chain entanglement entropy
performs a random walk around its stationary value.  This script samples
the per-step rate dS/dt inside the late-time window for a modest
ensemble, histograms it, and overlays the best Gaussian fit: at weak
monitoring the distribution is Gaussian to high accuracy.

Run:  python3 demos/qsd_entropy_rate_distribution.py
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from monferm.runner import RunConfig, run_trajectory
from monferm.stats import Histogram, auto_edges, fit_distribution

L = 32
GAMMA = 0.1
N_TRAJ = 150

print(f"sampling {N_TRAJ} diffusive trajectories at L={L}, gamma={GAMMA} ...")
config = RunConfig(protocol="qsd", L=L, gamma=GAMMA, n_traj=N_TRAJ, seed=1)
rates = np.concatenate(
    [run_trajectory(config, i)["ds_rate"] for i in range(N_TRAJ)]
)
print(f"collected {rates.size} window samples, "
      f"mean {rates.mean():+.4f}, std {rates.std():.4f}")

hist = Histogram(auto_edges(rates, bins=121, symmetric=True)).add(rates)
fit = fit_distribution(hist, "gaussian")
mu, sigma = fit.params["mu"], fit.params["sigma"]
print(f"gaussian fit: mu={mu:+.4f}, sigma={sigma:.4f}, "
      f"log-density residual {fit.residual_norm:.3f}")

centers = hist.centers()
density = hist.density()
x = np.linspace(centers[0], centers[-1], 400)
gauss = np.exp(fit.params["logc"] - (x - mu) ** 2 / (2 * sigma**2))

fig, ax = plt.subplots(figsize=(6, 4))
ax.semilogy(centers, density, ".", label="sampled dS/dt")
ax.semilogy(x, gauss, "-", label="gaussian fit")
ax.set_xlabel("dS/dt in the stationary window")
ax.set_ylabel("probability density")
ax.set_title(f"diffusive monitoring, L={L}, gamma={GAMMA}")
ax.legend()
fig.tight_layout()
fig.savefig("qsd_entropy_rate_distribution.png", dpi=150)
print("wrote qsd_entropy_rate_distribution.png")
