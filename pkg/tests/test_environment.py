import numpy as np
import pytest

from hiercan.environment import (ChiShape, EnvLaw, EnvSpec, ParamFamily, derive_seed, hash_vertices,
                                 validate)
from hiercan.hiergroup import HierAddress, TreeAddress

from conftest import make_env


def test_two_point_mean_one():
    law = EnvLaw.two_point(0.5, 1.5, 0.5)
    env = make_env(ParamFamily.polynomial(), law, seed=3)
    levels = np.arange(1, 20001)
    rho = env.spine(levels)
    assert set(np.unique(rho)) <= {0.5, 1.5}
    assert abs(rho.mean() - 1.0) < 4 * 0.5 / np.sqrt(len(rho))


def test_lazy_field_is_pure():
    env = make_env(ParamFamily.polynomial(), EnvLaw.two_point(0.5, 1.5, 0.5), seed=11)
    xi = TreeAddress(HierAddress((2, 1, 1), 3), 1)
    same = TreeAddress(HierAddress((0, 1, 1), 3), 1)
    assert env.rho_at(xi) == env.rho_at(same) == env.with_seed(11).rho_at(xi)
    assert env.rho_at(xi) == env.level_table(1, 3, 3)[(1 * 1) + 1 * 3]


def test_hash_depends_on_keys():
    assert derive_seed(1, 0) != derive_seed(1, 1) != derive_seed(2, 1)
    h = hash_vertices(5, [0, 0], np.array([[1, 0], [0, 1]]))
    assert h[0] != h[1]


@pytest.mark.parametrize("law", [EnvLaw.dirac(1.0), EnvLaw.two_point(0.5, 1.5, 0.5),
                                 EnvLaw.atoms([(0.5, 0.25), (1.0, 0.5), (1.5, 0.25)])])
def test_law_roundtrip(law):
    assert EnvLaw.from_dict(law.to_dict()) == law
    assert np.isclose(law.mean, 1.0)
    assert np.isclose(law.expect(lambda r: r ** 2), law.second_moment)


def test_param_families():
    p = ParamFamily.polynomial(a=1.0, b=0.0, const_c=2.0, const_mu=0.5)
    assert np.allclose(p.c([0, 1, 2]), [2.0, 4.0, 6.0])
    assert np.allclose(p.lam([0, 5]), [1.0, 1.0])
    e = ParamFamily.exponential(c=2.0, mu=0.5)
    assert np.allclose(e.c([0, 3]), [1.0, 8.0])
    x = ParamFamily.explicit([1, 2], [3, 4])
    with pytest.raises(IndexError):
        x.c(2)
    for fam in (p, e, x):
        assert ParamFamily.from_dict(fam.to_dict()) == fam
    spec = EnvSpec(EnvLaw.dirac(1.0), ChiShape(((0.25, 0.5), (0.5, 0.5))), p)
    assert EnvSpec.from_dict(spec.to_dict()) == spec


def test_validate_messages():
    ok = validate(EnvSpec(EnvLaw.two_point(0.5, 2.0, 1 / 3), ChiShape(), ParamFamily.polynomial()), 3)
    assert ok.ok and ok.bounded_support and np.isclose(ok.delta, 0.5)
    assert np.isclose(ok.second_moment, 0.25 * 2 / 3 + 4 / 3)
    bad = validate(EnvSpec(EnvLaw.dirac(1.0), ChiShape(), ParamFamily.exponential(c=4.0, mu=1.0)), 3)
    assert bad.migration_growth_ok is False and not bad.ok
    zero = validate(EnvSpec(EnvLaw.dirac(0.0), ChiShape(), ParamFamily.polynomial()), 3)
    assert "zero environment; valid only as comparison baseline" in zero.messages


def test_shape_validation():
    with pytest.raises(ValueError):
        ChiShape(((0.0, 1.0),))
    with pytest.raises(ValueError):
        ChiShape(((0.5, 0.4),))
    assert ChiShape(((0.5, 1.0),)).star_mass == 4.0
