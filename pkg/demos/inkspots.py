"""Growth of grid sets by the union of their dense balls."""

from ldrift.inkspots import fixture_suite, grow_set, growth_target, iterate_growth

zeta = 0.5
target = growth_target(2, zeta)
for i, g in enumerate(fixture_suite(m=128, n_sets=5, seed=7, d=2)):
    r = grow_set(g, zeta, 2, 0.5)
    sizes, stalled = iterate_growth(g, zeta, 2)
    print(f"fixture {i}: |set| = {g.count:5d}  growth {r.growth_factor:.3f} (target {target:.4f})  "
          f"iterations to fill {len(sizes) - 1}{' (stalled)' if stalled else ''}")
