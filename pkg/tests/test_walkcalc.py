import math

import numpy as np
import pytest
from scipy.linalg import expm

from hiercan.environment import ParamFamily
from hiercan.hiergroup import shell_size
from hiercan.walkcalc import (block_prob, compose, green_asymptote, green_pair, mean_hazard, mean_hazard_horizon,
                              profile, transience_degree, transition_prob)


def generator(prof, N):
    """Generator of the walk on B_J(0) as a dense matrix (small N, J)."""
    J = prof.jmax
    size = N ** J
    idx = np.arange(size)
    Q = np.zeros((size, size))
    for j in range(1, J + 1):
        blocks = idx // N ** j
        same = blocks[:, None] == blocks[None, :]
        Q += prof.q[j] * same / N ** j
    Q -= np.diag(Q.sum(axis=1))
    return Q


@pytest.mark.parametrize("N", [2, 3])
def test_kernel_matches_matrix_exponential(N):
    prof = profile(ParamFamily.polynomial(a=0.5, const_mu=0.3), N, level_cut=4)
    P = expm(generator(prof, N) * 0.7)
    for k in range(5):
        eta = N ** (k - 1) if k else 0
        assert np.isclose(transition_prob(prof, 0.7, k), P[0, eta], atol=1e-13)
    assert np.isclose(block_prob(prof, 0.7, 2), P[0, : N ** 2].sum(), atol=1e-13)


@pytest.mark.parametrize("t", [0.0, 0.3, 5.0])
def test_normalized(t):
    N = 3
    prof = profile(ParamFamily.polynomial(), N)
    total = sum(shell_size(k, N) * transition_prob(prof, t, k) for k in range(prof.jmax + 1))
    assert abs(total - 1.0) < 1e-12


def test_chapman_kolmogorov():
    N = 2
    prof = profile(ParamFamily.polynomial(), N, level_cut=6)
    ks = range(prof.jmax + 1)
    ps = np.array([transition_prob(prof, 0.4, k) for k in ks])
    pt = np.array([transition_prob(prof, 1.1, k) for k in ks])
    pst = np.array([transition_prob(prof, 1.5, k) for k in ks])
    assert np.allclose(compose(prof, ps, pt), pst, atol=1e-14)


def test_eigenvalue_forms():
    N = 3
    prof = profile(ParamFamily.polynomial(a=0.3), N, jmax=30)
    r, D = prof.r, prof.D
    tail = np.concatenate([np.cumsum(r[::-1])[::-1][1:], [0.0]])
    h = D * (N / (N - 1) * r + tail)
    assert np.allclose(h[1:], prof.h[1:prof.jmax + 1])


@pytest.mark.parametrize("p", [0, 1, 2])
def test_green_diagonal_asymptote(p):
    prof = profile(ParamFamily.exponential(c=2.0, mu=0.5), 5000)
    g = green_pair(prof, p, p)
    assert g.finite and math.isclose(g.value, green_asymptote(prof, p, p), rel_tol=1e-2)


def test_green_off_diagonal_order():
    N = 5000
    prof = profile(ParamFamily.exponential(c=2.0, mu=0.5), N)
    g = green_pair(prof, 0, 1).value
    assert math.isclose(g, green_pair(prof, 1, 0).value, rel_tol=1e-14)
    cb = prof.cbar
    assert math.isclose(g, (0.5 / cb[0] + 0.5 / cb[1]) / N, rel_tol=1e-2)
    assert 0.5 < g / green_asymptote(prof, 0, 1) < 1.0


def test_green_truncated_infinite():
    N = 50
    assert not green_pair(profile(ParamFamily.polynomial(), N, level_cut=3), 0, 0).finite


def test_hazard_growth_and_divergence():
    p = ParamFamily.polynomial()
    prof = profile(p, 3, level_cut=3)
    lam = p.lam(np.arange(4))
    vals = [mean_hazard_horizon(prof, lam, t) for t in (1.0, 10.0, 100.0)]
    assert np.all(np.diff(vals) > 0)
    mh = mean_hazard(p, 3, 50)
    assert mh.diverges and np.all(np.diff(mh.partial_sums) > 0)
    assert mean_hazard(ParamFamily.exponential(c=3.0, mu=1.0, const_mu=0.5), 4, 50).diverges is False


def test_transience_degree():
    gamma, dim = transience_degree(2.0, 4)
    assert math.isclose(gamma, 1.0) and math.isclose(dim, 4.0)
    with pytest.raises(ValueError):
        transience_degree(5.0, 4)


def test_overflow_rejected():
    with pytest.raises(ValueError):
        profile(ParamFamily.exponential(c=5.0, mu=1.0), 3)
