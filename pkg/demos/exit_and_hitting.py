"""Exit times and hitting probabilities of Brownian motion against closed forms.

Run with ``python demos/exit_and_hitting.py``; takes about half a minute.
"""

import math

from ldrift.fields import make_diffusion_field, make_example_field
from ldrift.regions import Ball
from ldrift.simulate import SimConfig
from ldrift.stopping import walk_ensemble
from ldrift.verify.oracles import bm_exit_moment, bm_hitting_prob

# Mean exit time of the unit disc from the origin, with and without the bridge test.
b, a = make_example_field("zero", 2), make_diffusion_field("identity", 2)
for bridge in (False, True):
    cfg = SimConfig(dt=1e-3, horizon=5.0, n_paths=20000, master_seed=1, start_point=(0.0, 0.0))
    tau = walk_ensemble(cfg, b, a, domain=Ball((0.0, 0.0), 1.0), bridge=bridge).exit_times
    se = tau.std(ddof=1) / math.sqrt(tau.size)
    print(f"bridge={bridge!s:5}  mean exit time {tau.mean():.4f} +- {se:.4f}  (exact {bm_exit_moment(2, 1.0, 0.0)})")

# Probability of reaching B_1/4 before leaving B_1 from |x| = 1/2 in three dimensions.
b, a = make_example_field("zero", 3), make_diffusion_field("identity", 3)
cfg = SimConfig(dt=1e-3, horizon=5.0, n_paths=20000, master_seed=2, start_point=(0.5, 0.0, 0.0))
o = (0.0, 0.0, 0.0)
res = walk_ensemble(cfg, b, a, domain=Ball(o, 1.0), target=Ball(o, 0.25), stop_on_hit=True, bridge=True)
p = res.hit.mean()
print(f"hitting probability {p:.4f} +- {math.sqrt(p * (1 - p) / res.n_paths):.4f}  (exact {bm_hitting_prob(3, 0.25, 1.0, 0.5):.4f})")

# A singular drift pointing inwards keeps paths in the disc longer.
b = make_example_field("radial_ld_member", 2, c=-1.0, beta=1.0)
cfg = SimConfig(dt=1e-3, horizon=20.0, n_paths=20000, master_seed=3, start_point=(0.0, 0.0))
tau = walk_ensemble(cfg, b, make_diffusion_field("identity", 2), domain=Ball((0.0, 0.0), 1.0), bridge=True).exit_times
print(f"inward radial drift: mean exit time {tau.mean():.4f}")
