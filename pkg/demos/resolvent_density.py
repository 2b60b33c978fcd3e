"""Histogram estimate of the resolvent density of 3-d Brownian motion.

Compares shell masses with the exact kernel ``exp(-sqrt(2 lam) r) / (2 pi r)``
and saves an SVG of the radial profile next to this script.
Takes about a minute.
"""

from pathlib import Path

import numpy as np

from ldrift.fields import make_diffusion_field, make_example_field
from ldrift.green import estimate_green_density, grid_for, radial_profile
from ldrift.plotting import plot
from ldrift.simulate import SimConfig
from ldrift.verify.oracles import bm_resolvent_kernel

lam = 0.5
o = (0.0, 0.0, 0.0)
b, a = make_example_field("zero", 3), make_diffusion_field("identity", 3)
cfg = SimConfig(dt=1e-3, horizon=60.0, n_paths=100000, master_seed=5, start_point=o)
est = estimate_green_density(cfg, b, a, grid_for(o, 2.05, 0.1), lam)
print(f"total mass {est.mean_total:.4f} +- {est.mean_total_se:.4f} (exact {1 / lam})")

edges = np.linspace(0.5, 2.0, 7)
mids, mass, mse, kmass = radial_profile(est, edges, lambda r: bm_resolvent_kernel(lam, r))
for r, m, s, k in zip(mids, mass, mse, kmass):
    print(f"shell around r = {r:.3f}: {m:.4f} +- {s:.4f}, kernel {k:.4f}, ratio {m / k:.4f}")

out = Path(__file__).with_name("resolvent_density.txt")
out.write_text(est.to_text())
print("wrote", plot(out, "green-radial"))
