"""The forward Cannings model next to its dual.

A small hierarchical population (N = 3, two levels, 20 individuals per
colony, weak immigration toward theta) is run forward; the type frequencies of the 1-blocks wander and
without immigration the global average would be a martingale.  The single-site particle system then
checks the equilibrium variance formula, and a short coalescent trajectory
shows the event log of the dual.

Run: python3 demos/forward_and_dual.py   (under a minute)
"""

import numpy as np

from hiercan.coalescent import simulate
from hiercan.environment import ChiShape, EnvLaw, EnvSpec, Environment, ParamFamily
from hiercan.forward import ForwardConfig, block_average, mkv_particle, simulate_forward
from hiercan.hiergroup import HierAddress

params = ParamFamily.polynomial(const_mu=0.1)  # c_k = 1, lambda_k = 0.2
env = Environment(EnvSpec(EnvLaw.two_point(0.5, 1.5, 0.5), ChiShape(), params), 3)

cfg = ForwardConfig(N=3, K=2, M=20, theta=(0.5, 0.5), env=env, d0=0.5, horizon=50.0, record_every=10.0, seed=3,
                    immigration=0.05)
tr = simulate_forward(cfg)
print(f"forward run: {tr.events} events")
for i, t in enumerate(tr.times):
    st = tr.state(i)
    blocks = [block_average(st, HierAddress.from_index(b * 3, 3), 1)[0] for b in range(3)]
    print(f"  t = {t:5.1f}  type-0 share of the 1-blocks: {np.round(blocks, 3)}  global: {tr.global_average()[i, 0]:.3f}")

r = mkv_particle(1.0, 0.25, [(0.5, 1.0)], (0.5, 0.5), 1000, 200.0, seed=1)
print(f"\nparticle system: variance {r.variance:.4f} +- {r.se_variance:.4f}, "
      f"limit {r.predicted_variance:.4f}, finite-n {r.finite_n_variance:.4f}")

st = simulate(4, [HierAddress.zero(3)] * 4, env, 3, 3, 10.0, seed=5, d0=0.5)
print(f"\ndual coalescent, 4 lineages to t = 10: blocks {st.partition.sizes()}")
print(st.log_csv())
