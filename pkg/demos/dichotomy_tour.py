"""Clustering versus coexistence, three ways.

1. the hazard series decides the regime analytically;
2. the volatility recursion shows how block averages lose (or keep) variance;
3. the dual coalescent confirms it: pairs of lineages either meet almost
   surely or keep a plateau below one.

Run: python3 demos/dichotomy_tour.py   (about a minute)
"""

import numpy as np

from hiercan.chain import cluster_class
from hiercan.coalescent import pair_coalescence_estimate
from hiercan.dichotomy import classify_finite_N
from hiercan.environment import ChiShape, EnvLaw, EnvSpec, Environment, ParamFamily
from hiercan.renorm import classify_family, recurse
from hiercan.walkcalc import mean_hazard

law = EnvLaw.two_point(0.5, 1.5, 0.5)
configs = {
    "flat (c = 1, lambda = 1), N = 3": (ParamFamily.polynomial(), 3, 6, [10, 100, 1000]),
    "geometric (c = 3^k, lambda = 1), N = 4": (ParamFamily.exponential(c=3.0, mu=1.0, const_mu=0.5), 4, 12,
                                               [25, 100, 400]),
}

for name, (params, N, cut, horizons) in configs.items():
    print(f"== {name}")
    fin = classify_finite_N(params, N)
    mh = mean_hazard(params, N, 200)
    print(f"regime: {fin.regime}; hazard partial sum at level 200: {mh.value:.3g}")

    sc = classify_family(params, law)
    tr = recurse(params, law, 1.0, 200)
    cc = cluster_class(sc)
    print(f"scaling case {sc.case}, cluster class {cc.regime if cc.classified else 'n/a'}; "
          f"d_k/c_k at k = 10, 50, 200: {np.array2string(tr.ratio_c[[10, 50, 200]], precision=4)}")

    env = Environment(EnvSpec(law, ChiShape(), params), 0)
    est = pair_coalescence_estimate(env, N, cut, horizons, 4000, seed=0, annealed=True)
    for t, p, se in zip(est.horizons, est.prob, est.stderr):
        print(f"  P(pair merged by t = {t:>6g}) = {p:.3f} +- {se:.3f}")
    print()
