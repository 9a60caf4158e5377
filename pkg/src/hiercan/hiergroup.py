"""Arithmetic and geometry of the hierarchical group and its tree.

Points of the hierarchical group of order ``N`` are sequences of digits in
``{0, ..., N-1}`` with only finitely many nonzero entries.  The distance
between two points is the lowest position from which on all digits agree;
this is an ultrametric.  A vertex of the full tree is a pair
``(base, height)``: the ``height``-block containing ``base``.

Addresses are stored canonically (no trailing zeros), so equality and
hashing are exact.  Everything here is an immutable value type.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence


def _strip(digits: Sequence[int]) -> tuple:
    digits = list(digits)
    while digits and digits[-1] == 0:
        digits.pop()
    return tuple(digits)


@dataclass(frozen=True)
class HierAddress:
    """A point of the hierarchical group, lowest coordinate first."""

    digits: tuple
    N: int

    def __post_init__(self):
        if int(self.N) < 2:
            raise ValueError(f"order N must be >= 2, got {self.N}")
        digits = tuple(int(x) for x in self.digits)
        for x in digits:
            if not 0 <= x < self.N:
                raise ValueError(f"digit {x} out of range for N={self.N}")
        object.__setattr__(self, "digits", _strip(digits))
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def zero(cls, N: int) -> "HierAddress":
        return cls((), N)

    @classmethod
    def parse(cls, text: str, N: int) -> "HierAddress":
        """Inverse of ``str``: ``"2,0,1"`` -> digits (2, 0, 1)."""
        text = text.strip()
        if not text:
            return cls((), N)
        return cls(tuple(int(x) for x in text.split(",")), N)

    def __str__(self) -> str:
        return ",".join(str(x) for x in self.digits) if self.digits else "0"

    def digit(self, position: int) -> int:
        return self.digits[position] if position < len(self.digits) else 0

    def __len__(self) -> int:
        return len(self.digits)

    def __add__(self, other: "HierAddress") -> "HierAddress":
        return add(self, other)

    def __neg__(self) -> "HierAddress":
        return HierAddress(tuple((-x) % self.N for x in self.digits), self.N)

    def __sub__(self, other: "HierAddress") -> "HierAddress":
        return add(self, -other)

    def to_index(self, levels: int) -> int:
        """Integer label of the point inside ``B_levels(0)``.

        Only valid when all nonzero digits sit below ``levels``.
        """
        if len(self.digits) > levels:
            raise ValueError(f"{self} lies outside the {levels}-block of 0")
        idx = 0
        for pos in reversed(range(len(self.digits))):
            idx = idx * self.N + self.digits[pos]
        return idx

    @classmethod
    def from_index(cls, idx: int, N: int) -> "HierAddress":
        digits = []
        while idx:
            idx, r = divmod(idx, N)
            digits.append(r)
        return cls(tuple(digits), N)


@dataclass(frozen=True)
class TreeAddress:
    """Vertex of the full tree at ``height`` above the leaf ``base``.

    The digits of ``base`` below ``height`` carry no information and are
    zeroed on construction, so two descriptions of the same block compare
    equal.
    """

    base: HierAddress
    height: int

    def __post_init__(self):
        if self.height < 0:
            raise ValueError(f"height must be >= 0, got {self.height}")
        digits = self.base.digits
        if any(digits[: self.height]):
            zeroed = (0,) * min(self.height, len(digits)) + digits[self.height:]
            object.__setattr__(self, "base", HierAddress(zeroed, self.base.N))

    @property
    def N(self) -> int:
        return self.base.N

    def __str__(self) -> str:
        return f"{self.base}@{self.height}"

    @classmethod
    def parse(cls, text: str, N: int) -> "TreeAddress":
        base, _, height = text.partition("@")
        if not height:
            raise ValueError(f"tree address needs 'base@height', got {text!r}")
        return cls(HierAddress.parse(base, N), int(height))

    def parent(self) -> "TreeAddress":
        return TreeAddress(self.base, self.height + 1)

    def contains(self, eta: HierAddress) -> bool:
        return ancestor(eta, self.height) == self


def _check_same_order(a, b):
    if a.N != b.N:
        raise ValueError(f"mismatched group orders N={a.N} and N={b.N}")


def distance(a: HierAddress, b: HierAddress) -> int:
    """Ultrametric distance: the height of the lowest common block."""
    _check_same_order(a, b)
    n = max(len(a.digits), len(b.digits))
    for pos in range(n - 1, -1, -1):
        if a.digit(pos) != b.digit(pos):
            return pos + 1
    return 0


def add(a: HierAddress, b: HierAddress) -> HierAddress:
    """Digit-wise addition modulo ``N`` (no carries)."""
    _check_same_order(a, b)
    n = max(len(a.digits), len(b.digits))
    return HierAddress(tuple((a.digit(i) + b.digit(i)) % a.N for i in range(n)), a.N)


def ancestor(a: HierAddress, k: int) -> TreeAddress:
    """The height-``k`` vertex above the leaf ``a`` (the block ``B_k(a)``)."""
    if k < 0:
        raise ValueError(f"ancestor height must be >= 0, got {k}")
    return TreeAddress(a, k)


def block_members(xi: TreeAddress) -> Iterator[HierAddress]:
    """Lazily enumerate the ``N**height`` leaves below ``xi``."""
    N, k = xi.N, xi.height
    upper = xi.base.digits[k:]
    for low in itertools.product(range(N), repeat=k):
        # itertools.product varies the last slot fastest; reverse so that
        # the lowest coordinate changes fastest
        yield HierAddress(tuple(reversed(low)) + upper if k else xi.base.digits, N)


def tree_distance(x: TreeAddress, y: TreeAddress) -> int:
    """Larger of the two graph distances to the most recent common ancestor."""
    _check_same_order(x.base, y.base)
    top = max(x.height, y.height, distance(x.base, y.base))
    return top - min(x.height, y.height)


def shell_size(k: int, N: int) -> int:
    """Number of points at distance exactly ``k`` from a given point."""
    return 1 if k == 0 else N ** k - N ** (k - 1)
