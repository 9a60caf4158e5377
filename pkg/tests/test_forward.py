import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiercan.environment import ChiShape, EnvLaw, ParamFamily
from hiercan.forward import (ForwardConfig, ForwardState, block_average, blockscale_check, blockscale_prediction,
                             mkv_particle, mkv_variance, simulate_forward)
from hiercan.hiergroup import HierAddress

from conftest import make_env


def _cfg(params, **kw):
    law = kw.pop("law", EnvLaw.two_point(0.5, 1.5, 0.5))
    env = make_env(params, law, seed=kw.pop("env_seed", 0))
    base = dict(N=3, K=2, M=6, theta=(0.3, 0.3, 0.4), env=env, d0=0.5, horizon=5.0, seed=1)
    base.update(kw)
    return ForwardConfig(**base)


@pytest.mark.parametrize("kw", [dict(M=1), dict(theta=(0.5, 0.6)), dict(theta=(1.0,)), dict(obs_level=3),
                                dict(record_every=0.0), dict(d0=-1.0)])
def test_config_validation(flat_params, kw):
    with pytest.raises(ValueError):
        _cfg(flat_params, **kw)


def test_frozen_when_all_rates_vanish():
    params = ParamFamily.explicit([0.0] * 4, [0.0] * 4)
    cfg = _cfg(params, d0=0.0)
    tr = simulate_forward(cfg)
    assert tr.events == 0
    assert np.all(tr.counts == tr.counts[0])


@pytest.mark.parametrize("seed", range(4))
def test_counts_conserved(flat_params, seed):
    cfg = _cfg(flat_params, seed=seed, immigration=0.3)
    tr = simulate_forward(cfg)
    assert tr.events > 0
    assert np.all(tr.counts.sum(axis=2) == cfg.M)
    assert np.all(tr.counts >= 0)
    assert np.allclose(tr.global_average().sum(axis=1), 1.0)


def test_deterministic(flat_params):
    a = simulate_forward(_cfg(flat_params, seed=7))
    b = simulate_forward(_cfg(flat_params, seed=7))
    assert np.array_equal(a.counts, b.counts) and a.to_csv(1) == b.to_csv(1)


def test_migration_only_conserves_totals():
    # swaps and no resampling: the global type counts never change
    params = ParamFamily.explicit([1.0, 1.0, 1.0], [0.0, 0.0, 0.0])
    tr = simulate_forward(_cfg(params, d0=0.0, horizon=20.0))
    tot = tr.counts.sum(axis=1)
    assert tr.events > 0 and np.all(tot == tot[0])


@given(st.integers(0, 2), st.integers(0, 8), st.integers(0, 10 ** 6))
@settings(max_examples=40, deadline=None)
def test_block_average_identities(k, pos, seed):
    N, K = 3, 2
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(5, [0.2, 0.3, 0.5], size=N ** K)
    s = ForwardState(counts, 0.0, N, K)
    eta = HierAddress.from_index(pos, N)
    avg = block_average(s, eta, k)
    assert avg.sum() == pytest.approx(1.0)
    if k < K:
        # the (k+1)-block average is the mean of its k-sub-blocks
        base = pos // N ** (k + 1) * N ** (k + 1)
        subs = [block_average(s, HierAddress.from_index(base + i * N ** k, N), k) for i in range(N)]
        assert np.allclose(np.mean(subs, axis=0), block_average(s, eta, k + 1))
    assert np.allclose(block_average(s, eta, K), counts.sum(axis=0) / counts.sum())


def test_block_average_rejects_height():
    s = ForwardState(np.ones((4, 2), dtype=int), 0.0, 2, 2)
    with pytest.raises(ValueError):
        block_average(s, HierAddress.zero(2), 3)


def test_to_csv_shape(flat_params):
    tr = simulate_forward(_cfg(flat_params, horizon=2.0))
    lines = tr.to_csv(1).splitlines()
    assert lines[0] == "time,block,type0,type1,type2"
    assert len(lines) == 1 + len(tr) * 3


def test_single_colony_matches_particle_variance():
    # K = 0: one colony with immigration, Moran and level-0 reproduction is the
    # finite particle system, whose stationary variance is known exactly
    lam0, c, d0, M = 1.0, 1.0, 0.25, 40
    params = ParamFamily.explicit([0.0], [lam0])
    env = make_env(params, EnvLaw.dirac(1.0), shape=ChiShape(((0.5, 1.0),)))
    cfg = ForwardConfig(2, 0, M, (0.5, 0.5), env, d0=d0, horizon=3000.0, record_every=0.5, seed=3,
                        immigration=c)
    tr = simulate_forward(cfg)
    y = tr.counts[200:, 0, 0] / M
    want = mkv_variance(c, d0, [(0.5, lam0)], 0.5, n=M)
    assert y.mean() == pytest.approx(0.5, abs=0.03)
    assert y.var() == pytest.approx(want, rel=0.12)


def test_mkv_variance_formula():
    assert mkv_variance(1.0, 0.25, [(0.5, 1.0)], 0.5) == pytest.approx(1.5 / 3.5 * 0.25)
    # finite n approaches the limit
    lim = mkv_variance(1.0, 0.25, [(0.5, 1.0)], 0.5)
    assert abs(mkv_variance(1.0, 0.25, [(0.5, 1.0)], 0.5, n=10 ** 6) - lim) < 1e-6
    # no reproduction: the binomial sampling variance of n independent theta-draws
    assert mkv_variance(1.0, 0.0, [], 0.5, n=100) == pytest.approx(0.25 / 100)


def test_mkv_particle_small():
    r = mkv_particle(1.0, 0.25, [(0.5, 1.0)], (0.5, 0.5), 200, 200.0, seed=2)
    assert abs(r.mean - 0.5) < 5 * r.se_mean + 0.01
    assert abs(r.variance - r.finite_n_variance) < 5 * r.se_variance + 0.01
    with pytest.raises(ValueError):
        mkv_particle(1.0, 0.25, [(1.5, 1.0)], (0.5, 0.5), 200, 10.0, seed=2)


def test_blockscale_prediction_limits():
    assert blockscale_prediction(1.0, 0.5) == pytest.approx(1 / 3)
    assert blockscale_prediction(1.0, 0.5, N=10 ** 9) == pytest.approx(1 / 3)
    assert blockscale_prediction(1.0, 0.5, N=4) > blockscale_prediction(1.0, 0.5)


def test_blockscale_check_runs():
    env = make_env(ParamFamily.explicit([1.0, 0.2, 0.2], [0.0, 0.0, 0.0]))
    rep = blockscale_check(env, Ns=(3,), M=10, macro_horizon=4.0, macro_burn=0.5)
    assert rep.estimate[0] > 0 and abs(rep.estimate[0] - rep.predicted_finite[0]) < 0.15
