import itertools

import pytest
from hypothesis import given, strategies as st

from hiercan.hiergroup import (HierAddress, TreeAddress, add, ancestor, block_members, distance, shell_size,
                               tree_distance)


def addr(N):
    return st.lists(st.integers(0, N - 1), max_size=6).map(lambda d: HierAddress(tuple(d), N))


@pytest.mark.parametrize("a, b, expected", [
    ((), (), 0),
    ((1,), (), 1),
    ((0, 0, 2), (), 3),
    ((1, 2), (2, 2), 1),
    ((1, 2), (1, 0), 2),
])
def test_distance_examples(a, b, expected):
    assert distance(HierAddress(a, 3), HierAddress(b, 3)) == expected


def test_canonical_trailing_zeros():
    assert HierAddress((1, 0, 0), 3) == HierAddress((1,), 3)
    assert str(HierAddress.zero(4)) == "0"
    assert HierAddress.parse("2,0,1", 3).digits == (2, 0, 1)


def test_bad_digits():
    with pytest.raises(ValueError):
        HierAddress((3,), 3)
    with pytest.raises(ValueError):
        HierAddress((), 1)


@given(addr(3), addr(3), addr(3))
def test_ultrametric(a, b, c):
    assert distance(a, c) <= max(distance(a, b), distance(b, c))
    assert distance(a, b) == distance(b, a)
    assert (distance(a, b) == 0) == (a == b)


@given(addr(4), addr(4), addr(4))
def test_group_laws(a, b, c):
    assert add(add(a, b), c) == add(a, add(b, c))
    assert a + (-a) == HierAddress.zero(4)
    assert distance(a + c, b + c) == distance(a, b)  # translation invariance


@given(addr(3))
def test_index_roundtrip(a):
    assert HierAddress.from_index(a.to_index(6), 3) == a


@pytest.mark.parametrize("N, k", [(2, 0), (2, 3), (3, 2), (5, 1)])
def test_block_members(N, k):
    xi = TreeAddress(HierAddress((1,) * (k + 1), N), k)
    members = list(block_members(xi))
    assert len(members) == N ** k == len(set(members))
    assert all(xi.contains(m) for m in members)


def test_ancestor_and_tree():
    a = HierAddress((1, 2, 1), 3)
    assert ancestor(a, 2) == TreeAddress(HierAddress((0, 0, 1), 3), 2)
    assert str(ancestor(a, 1)) == "0,2,1@1"
    assert TreeAddress.parse("0,2,1@1", 3) == ancestor(a, 1)
    assert ancestor(a, 1).parent() == ancestor(a, 2)
    with pytest.raises(ValueError):
        ancestor(a, -1)
    x, y = ancestor(a, 0), ancestor(HierAddress((0, 2, 1), 3), 1)
    assert tree_distance(x, y) == 1


def test_shell_sizes_sum():
    N = 3
    assert sum(shell_size(k, N) for k in range(5)) == N ** 4
    assert list(itertools.islice((shell_size(k, 2) for k in range(4)), 4)) == [1, 1, 2, 4]
