import pytest

from hiercan.dichotomy import (CLUSTERING, COEXISTENCE, UNDECIDED, classify_finite_N, classify_limit,
                               criterion_partial_sums, regularity_check)
from hiercan.environment import ParamFamily


@pytest.mark.parametrize("params, N, regime", [
    (ParamFamily.polynomial(), 3, CLUSTERING),
    (ParamFamily.exponential(c=3.0, mu=1.0, const_mu=0.5), 4, COEXISTENCE),
    (ParamFamily.polynomial(a=2.0, b=0.0), 3, CLUSTERING),  # sum 1/k
    (ParamFamily.polynomial(a=2.5, b=0.0), 3, COEXISTENCE),
    (ParamFamily.polynomial(a=1.0, b=0.0), 3, CLUSTERING),  # sum log k / k diverges
    (ParamFamily.exponential(c=1.5, mu=1.5), 4, CLUSTERING),
])
def test_finite_N(params, N, regime):
    assert classify_finite_N(params, N).regime == regime


def test_limit_drops_lambda_term():
    # c_k = 2^k, lambda_k = 2 * 2^k: at N = 4 the lambda_{k+1}/N term is comparable to c_k
    p = ParamFamily.exponential(c=2.0, mu=2.0)
    assert classify_limit(p).regime == CLUSTERING == classify_finite_N(p, 4).regime


def test_explicit_undecided():
    v = classify_finite_N(ParamFamily.explicit([1.0] * 10, [1.0] * 10), 3)
    assert v.regime == UNDECIDED and not v.decided
    assert len(criterion_partial_sums(ParamFamily.explicit([1.0] * 10, [1.0] * 10), 3)) == 9


def test_regularity():
    assert regularity_check(ParamFamily.polynomial()).holds
    import math
    fact = [float(math.factorial(k)) for k in range(30)]
    rep = regularity_check(ParamFamily.explicit([1.0] * 30, fact))
    assert rep.method == "numeric-tail" and rep.first_branch is False
