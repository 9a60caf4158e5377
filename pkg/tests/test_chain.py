import math

import numpy as np
import pytest

from hiercan.chain import cluster_class, delta_limit, delta_trace, TrapKernel, variance_profile, wlln_check
from hiercan.environment import EnvLaw, ParamFamily
from hiercan.renorm import classify_exponential, classify_family, classify_polynomial, recurse

from conftest import make_env


@pytest.mark.parametrize("scaling, regime", [
    (classify_polynomial(0.0, 1.0), "I1"),
    (classify_polynomial(0.0, 0.0), "I2"),
    (classify_polynomial(0.0, -1.0), "II1"),
    (classify_polynomial(0.0, -2.0), "II2"),
    (classify_polynomial(1.0, -2.0), None),
    (classify_exponential(1.0, 2.0), "I1"),
    (classify_exponential(2.0, 2.0), "I2"),
    (classify_exponential(0.5, 0.5, 0.0, -1.0), "I2"),
    (classify_exponential(2.0, 2.0, 0.0, -1.0), "II2"),
    (classify_exponential(2.0, 2.0, 0.0, -0.5), "II1"),
    (classify_exponential(0.5, 0.25, 0.0, -1.0), "I2"),
    (classify_exponential(1.0, 0.5, 0.5, -1.0), "II2"),
])
def test_cluster_class(scaling, regime):
    assert cluster_class(scaling).regime == regime


def test_trap_kernel_mean():
    theta = [0.2, 0.3, 0.5]
    assert np.allclose(TrapKernel().mean(theta), theta)


def test_variance_profile_trivial():
    p = ParamFamily.polynomial(const_mu=0.0)
    env = make_env(p)
    vp = variance_profile(env, p, recurse(p, env.law, 0.0, 20), 20)
    assert np.all(vp.factors_quenched == 1.0)


def test_variance_profile_clusters():
    p = ParamFamily.polynomial()
    law = EnvLaw.two_point(0.5, 1.5, 0.5)
    env = make_env(p, law, seed=2)
    vp = variance_profile(env, p, recurse(p, law, 1.0, 200), 200)
    assert np.all(np.diff(vp.product_quenched) < 0) and vp.product_quenched[-1] < 1e-10


@pytest.mark.parametrize("a1", [0.2, 0.5, 0.9])
def test_delta_monotone(a1):
    p = ParamFamily.polynomial(b=-2.0, const_mu=0.0)
    s = classify_family(p)
    lo = delta_limit(p, s, a1, 0.0, 2000).delta
    hi = delta_limit(p, s, min(a1 + 0.05, 0.99), 0.0, 2000).delta
    assert 0 <= lo <= hi <= 1


def test_delta_case_c_limit():
    p = ParamFamily.polynomial(b=-1.0, const_mu=1.0)
    d = delta_limit(p, classify_family(p), 1.0, 0.0, 10000)
    assert math.isclose(d.limit, 1 - math.exp(-1)) and d.gap < 1e-2


def test_delta_trace_bounded():
    p = ParamFamily.polynomial(b=-1.0, const_mu=1.0)
    tr = recurse(p, EnvLaw.dirac(1.0), 1.0, 500)
    assert 0 < delta_trace(tr, 100, 400) < 1


def test_wlln_means():
    p = ParamFamily.polynomial(b=-1.0, const_mu=1.0)
    law = EnvLaw.two_point(0.5, 1.5, 0.5)
    env = make_env(p, law, seed=5)
    res = wlln_check(env, p, recurse(p, law, 1.0, 1001), 0, [100, 1000], 200, seed=1)
    assert np.all(np.abs(res.mean - 1) < 0.02)
    assert res.max_chi[1] < res.max_chi[0]
