"""Symbolic growth classes for closed-form parameter sequences.

A sequence is summarized by its leading behaviour

    x_k ~ coef * base**k * k**power * (log k)**logpower,

which is closed under products, reciprocals, sums, index shifts and partial
sums, and is enough to decide convergence of the series that appear in
the dichotomy criteria and to evaluate the limits that select the scaling
cases.  Bases are compared with a relative tolerance of 1e-12 so that
user-supplied equalities such as ``c == mu`` are honoured exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_RTOL = 1e-12


def _cmp(x: float, y: float) -> int:
    if math.isclose(x, y, rel_tol=_RTOL, abs_tol=_RTOL):
        return 0
    return -1 if x < y else 1


@dataclass(frozen=True)
class Asym:
    coef: float
    base: float = 1.0
    power: float = 0.0
    logpower: float = 0.0

    @classmethod
    def zero(cls) -> "Asym":
        return cls(0.0)

    @property
    def is_zero(self) -> bool:
        return self.coef == 0.0

    def key(self):
        return (math.log(self.base), self.power, self.logpower)

    def order(self, other: "Asym") -> int:
        """Compare growth (ignoring the constant); zero is smallest."""
        if self.is_zero or other.is_zero:
            return (not self.is_zero) - (not other.is_zero)
        for a, b in zip(self.key(), other.key()):
            c = _cmp(a, b)
            if c:
                return c
        return 0

    def __mul__(self, other: "Asym") -> "Asym":
        if self.is_zero or other.is_zero:
            return Asym.zero()
        return Asym(self.coef * other.coef, self.base * other.base,
                    self.power + other.power, self.logpower + other.logpower)

    def scale(self, s: float) -> "Asym":
        return Asym(self.coef * s, self.base, self.power, self.logpower) if s else Asym.zero()

    def inverse(self) -> "Asym":
        if self.is_zero:
            raise ZeroDivisionError("reciprocal of the zero sequence")
        return Asym(1.0 / self.coef, 1.0 / self.base, -self.power, -self.logpower)

    def __truediv__(self, other: "Asym") -> "Asym":
        return self * other.inverse()

    def __add__(self, other: "Asym") -> "Asym":
        c = self.order(other)
        if c > 0:
            return self
        if c < 0:
            return other
        return Asym(self.coef + other.coef, self.base, self.power, self.logpower)

    def shift(self, s: int = 1) -> "Asym":
        """Class of ``x_{k+s}``."""
        return self.scale(self.base ** s) if not self.is_zero else self

    def limit(self) -> float:
        """``lim x_k`` in [0, inf]."""
        if self.is_zero:
            return 0.0
        c = self.order(Asym(1.0))
        if c > 0:
            return math.inf
        if c < 0:
            return 0.0
        return self.coef

    def series_converges(self) -> bool:
        """Whether ``sum_k x_k`` is finite."""
        if self.is_zero:
            return True
        cb = _cmp(self.base, 1.0)
        if cb:
            return cb < 0
        cp = _cmp(self.power, -1.0)
        if cp:
            return cp < 0
        return _cmp(self.logpower, -1.0) < 0

    def partial_sum(self) -> "Asym":
        """Class of ``S_k = sum_{l <= k} x_l``.

        A convergent series gives a positive constant; the borderline
        ``1/(k log k)`` gives ``log log k``, which is recorded as a constant
        class -- this never changes a downstream convergence verdict since
        sum loglog(k) k^-1 (log k)^q converges iff q < -1.
        """
        if self.is_zero:
            return self
        if self.series_converges():
            return Asym(1.0)
        if _cmp(self.base, 1.0) > 0:
            return Asym(self.coef * self.base / (self.base - 1.0), self.base, self.power, self.logpower)
        if _cmp(self.power, -1.0) > 0:
            return Asym(self.coef / (self.power + 1.0), 1.0, self.power + 1.0, self.logpower)
        if _cmp(self.logpower, -1.0) > 0:
            return Asym(self.coef / (self.logpower + 1.0), 1.0, 0.0, self.logpower + 1.0)
        return Asym(1.0)

    def describe(self) -> str:
        if self.is_zero:
            return "0"
        parts = [f"{self.coef:.6g}"]
        if _cmp(self.base, 1.0):
            parts.append(f"{self.base:.6g}^k")
        if _cmp(self.power, 0.0):
            parts.append(f"k^{self.power:.6g}")
        if _cmp(self.logpower, 0.0):
            parts.append(f"(log k)^{self.logpower:.6g}")
        return " * ".join(parts)


def family_classes(params):
    """``(c, lam)`` growth classes of a closed-form :class:`ParamFamily`."""
    p = params.params
    if params.kind == "polynomial":
        c = Asym(p["const_c"], 1.0, p["a"], p["gamma_c"])
        mu = Asym(p["const_mu"], 1.0, p["b"], p["gamma_mu"]) if p["const_mu"] else Asym.zero()
    elif params.kind == "exponential":
        c = Asym(p["const_c"], p["c"], p["abar"], 0.0)
        mu = Asym(p["const_mu"], p["mu"], p["bbar"], 0.0) if p["const_mu"] else Asym.zero()
    else:
        raise ValueError("explicit families have no closed-form growth class")
    return c, mu.scale(2.0)
