import pytest

from hiercan.environment import ChiShape, EnvLaw, EnvSpec, Environment, ParamFamily


@pytest.fixture
def flat_params():
    """c_k = 1, lambda_k = 1."""
    return ParamFamily.polynomial(a=0.0, b=0.0, const_c=1.0, const_mu=0.5)


def make_env(params, law=None, seed=0, shape=None):
    return Environment(EnvSpec(law or EnvLaw.dirac(1.0), shape or ChiShape(), params), seed)
