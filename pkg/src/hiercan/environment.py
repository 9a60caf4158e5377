"""Quenched random environment on the hierarchical tree.

The environment attaches to every tree vertex ``xi`` a total mass
``rho^xi`` drawn i.i.d. from an atomic law, and a resampling measure
``Lambda^xi = lambda_{|xi|} * rho^xi * shape``.  Realization is lazy: the
value at a vertex is a pure function of ``(master_seed, xi)``, obtained by
hashing the vertex coordinates with a SplitMix64 fold and mapping the
resulting uniform through the law's cumulative weights.  No state is ever
mutated, so one ``Environment`` can be read from any number of threads or
processes and every replay sees the identical field.

Parameter sequences (migration ``c_k`` and resampling ``lambda_k``, with
``mu_k = lambda_k / 2``) live in :class:`ParamFamily`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .hiergroup import TreeAddress

_M64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_HEIGHT_SALT = np.uint64(0xD1B54A32D192ED03)
_POS_SALT = np.uint64(0x8CB92BA72F3D8DD7)


def _mix(z):
    """SplitMix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash_vertices(seed, heights, digits) -> np.ndarray:
    """Counter-based 64-bit hash of tree vertices.

    ``seed`` is a scalar or an array broadcastable against ``heights``;
    ``digits`` is an integer matrix of shape (n, L) padded with zeros.  Only
    nonzero digits at positions >= height enter the fold, so the hash
    depends on the vertex and not on how its base was written down.
    """
    heights = np.atleast_1d(np.asarray(heights, dtype=np.int64))
    digits = np.asarray(digits, dtype=np.int64)
    if digits.ndim == 1:
        digits = digits.reshape(len(heights), -1) if digits.size else np.zeros((len(heights), 0), np.int64)
    seed = np.asarray(seed, dtype=np.uint64) if np.ndim(seed) else np.full(len(heights), int(seed) & _M64, dtype=np.uint64)
    h = _mix(seed + _GOLDEN)
    h = _mix(h ^ (heights.astype(np.uint64) * _HEIGHT_SALT + _GOLDEN))
    for pos in range(digits.shape[1]):
        d = digits[:, pos]
        active = (d != 0) & (heights <= pos)
        if not active.any():
            continue
        term = _mix(np.full(len(d), pos + 1, dtype=np.uint64) * _POS_SALT + d.astype(np.uint64))
        h = np.where(active, _mix(h ^ term), h)
    return h


def hash_to_unit(h: np.ndarray) -> np.ndarray:
    """Map 64-bit hashes to uniforms in [0, 1) with 53 bits of precision."""
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic child seed, e.g. for environment replicas."""
    keys = np.asarray([list(keys)], dtype=np.int64) + 1
    h = hash_vertices((int(master_seed) ^ 0x5EED5EED5EED5EED) & _M64, [0], keys)
    return int(h[0])


# ---------------------------------------------------------------------------
# laws


@dataclass(frozen=True)
class EnvLaw:
    """Atomic law of the total mass ``rho``."""

    values: tuple
    weights: tuple
    kind: str = "atoms"

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        weights = tuple(float(w) for w in self.weights)
        if len(values) != len(weights) or not values:
            raise ValueError("law needs matching non-empty values and weights")
        if any(v < 0 for v in values):
            raise ValueError("law values must be >= 0")
        if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, abs_tol=1e-12):
            raise ValueError(f"law weights must be non-negative and sum to 1, got {sum(weights)}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, v: float = 1.0) -> "EnvLaw":
        return cls((v,), (1.0,), "dirac")

    @classmethod
    def two_point(cls, lo: float, hi: float, p: float) -> "EnvLaw":
        """``rho = hi`` with probability ``p``, else ``lo``."""
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        return cls((lo, hi), (1.0 - p, p), "two_point")

    @classmethod
    def atoms(cls, pairs) -> "EnvLaw":
        pairs = list(pairs)
        return cls(tuple(v for v, _ in pairs), tuple(w for _, w in pairs), "atoms")

    @property
    def v(self) -> np.ndarray:
        return np.asarray(self.values)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights)

    @property
    def mean(self) -> float:
        return float(self.v @ self.w)

    @property
    def second_moment(self) -> float:
        return float((self.v ** 2) @ self.w)

    @property
    def is_degenerate(self) -> bool:
        support = {v for v, w in zip(self.values, self.weights) if w > 0}
        return len(support) == 1

    def expect(self, fn):
        """Exact expectation ``E[fn(rho)]`` as a finite sum over atoms.

        ``fn`` receives the atom values with a trailing axis, so it may
        broadcast against arrays of other parameters.
        """
        vals = fn(self.v)
        return np.tensordot(vals, self.w, axes=([-1], [0]))

    def quantile(self, u: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.w)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, u, side="right")
        return self.v[np.minimum(idx, len(self.values) - 1)]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": list(self.values), "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, d: dict) -> "EnvLaw":
        return cls(tuple(d["values"]), tuple(d["weights"]), d.get("kind", "atoms"))


@dataclass(frozen=True)
class ChiShape:
    """Normalized atom measure ``sum_i w_i delta_{r_i}`` on (0, 1]."""

    atoms: tuple = ((0.5, 1.0),)

    def __post_init__(self):
        atoms = tuple((float(r), float(w)) for r, w in self.atoms)
        if not atoms:
            raise ValueError("shape needs at least one atom")
        for r, w in atoms:
            if not 0.0 < r <= 1.0:
                raise ValueError(f"atom location r={r} outside (0, 1]")
            if w <= 0:
                raise ValueError(f"atom weight must be positive, got {w}")
        if not math.isclose(sum(w for _, w in atoms), 1.0, abs_tol=1e-12):
            raise ValueError("shape weights must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def r(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def w(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])

    @property
    def star_mass(self) -> float:
        """Total mass of ``shape(dr) / r**2``."""
        return float(np.sum(self.w / self.r ** 2))

    def to_list(self) -> list:
        return [list(a) for a in self.atoms]


# ---------------------------------------------------------------------------
# parameter families

_FAMILIES = ("explicit", "polynomial", "exponential")


@dataclass(frozen=True)
class ParamFamily:
    """Migration rates ``c_k`` and resampling intensities ``lambda_k``.

    Use the constructors :meth:`explicit`, :meth:`polynomial` and
    :meth:`exponential`.  All sequence accessors are vectorized over ``k``.

    polynomial:  c_k  = const_c  (k+1)^a  log(k+e)^gamma_c
                 mu_k = const_mu (k+1)^b  log(k+e)^gamma_mu
    exponential: c_k  = const_c  c^k  (k+1)^abar
                 mu_k = const_mu mu^k (k+1)^bbar
    and always lambda_k = 2 mu_k.
    """

    kind: str
    coef: tuple = ()
    c_data: tuple = ()
    lam_data: tuple = ()

    def __post_init__(self):
        if self.kind not in _FAMILIES:
            raise ValueError(f"unknown family {self.kind!r}")

    @classmethod
    def explicit(cls, c: Sequence[float], lam: Sequence[float]) -> "ParamFamily":
        c, lam = tuple(float(x) for x in c), tuple(float(x) for x in lam)
        if not c or not lam:
            raise ValueError("explicit family needs non-empty sequences")
        return cls("explicit", (), c, lam)

    @classmethod
    def polynomial(cls, a=0.0, b=0.0, const_c=1.0, const_mu=0.5, gamma_c=0.0, gamma_mu=0.0):
        if const_c <= 0 or const_mu < 0:
            raise ValueError("need const_c > 0 and const_mu >= 0")
        return cls("polynomial", tuple(float(x) for x in (a, b, const_c, const_mu, gamma_c, gamma_mu)))

    @classmethod
    def exponential(cls, c=1.0, mu=1.0, abar=0.0, bbar=0.0, const_c=1.0, const_mu=1.0):
        if c <= 0 or mu <= 0 or const_c <= 0 or const_mu < 0:
            raise ValueError("need c, mu, const_c > 0 and const_mu >= 0")
        return cls("exponential", tuple(float(x) for x in (c, mu, abar, bbar, const_c, const_mu)))

    @property
    def params(self) -> dict:
        names = {
            "polynomial": ("a", "b", "const_c", "const_mu", "gamma_c", "gamma_mu"),
            "exponential": ("c", "mu", "abar", "bbar", "const_c", "const_mu"),
            "explicit": (),
        }[self.kind]
        return dict(zip(names, self.coef))

    @property
    def length(self) -> Optional[int]:
        """Number of available terms (``None`` for closed forms)."""
        if self.kind == "explicit":
            return min(len(self.c_data), len(self.lam_data))
        return None

    def _explicit(self, data, k):
        k = np.asarray(k)
        if np.any(k >= len(data)) or np.any(k < 0):
            raise IndexError(f"explicit sequence has {len(data)} terms; requested index {np.max(k)}")
        return np.asarray(data)[k]

    def c(self, k):
        k = np.asarray(k)
        p = self.coef
        if self.kind == "explicit":
            return self._explicit(self.c_data, k)
        kf = k.astype(float)
        if self.kind == "polynomial":
            return p[2] * (kf + 1.0) ** p[0] * np.log(kf + math.e) ** p[4]
        return p[4] * p[0] ** kf * (kf + 1.0) ** p[2]

    def mu(self, k):
        k = np.asarray(k)
        p = self.coef
        if self.kind == "explicit":
            return 0.5 * self._explicit(self.lam_data, k)
        kf = k.astype(float)
        if self.kind == "polynomial":
            return p[3] * (kf + 1.0) ** p[1] * np.log(kf + math.e) ** p[5]
        return p[5] * p[1] ** kf * (kf + 1.0) ** p[3]

    def lam(self, k):
        return 2.0 * self.mu(k)

    def sequences(self, kmax: int):
        """Arrays ``(c, lam)`` for ``k = 0..kmax``."""
        k = np.arange(kmax + 1)
        return self.c(k), self.lam(k)

    def to_dict(self) -> dict:
        if self.kind == "explicit":
            return {"family": "explicit", "c": list(self.c_data), "lam": list(self.lam_data)}
        return {"family": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "ParamFamily":
        d = dict(d)
        kind = d.pop("family")
        if kind == "explicit":
            return cls.explicit(d["c"], d["lam"])
        if kind == "polynomial":
            return cls.polynomial(**d)
        if kind == "exponential":
            return cls.exponential(**d)
        raise ValueError(f"unknown family {kind!r}")

    def growth_rates(self):
        """Exponential growth rates of ``c_k`` and ``lambda_k``.

        Returns ``(rate_c, rate_lam, exact)``; for explicit data the rates
        are tail estimates and ``exact`` is False.
        """
        if self.kind == "polynomial":
            return 0.0, 0.0, True
        if self.kind == "exponential":
            return math.log(self.coef[0]), math.log(self.coef[1]), True
        n = self.length
        k = np.arange(max(1, n // 2), n)
        if len(k) == 0:
            return float("nan"), float("nan"), False
        with np.errstate(divide="ignore"):
            rc = np.max(np.log(self.c(k)) / k)
            lam = self.lam(k)
            rl = np.max(np.log(lam[lam > 0]) / k[lam > 0]) if np.any(lam > 0) else -np.inf
        return float(rc), float(rl), False


# ---------------------------------------------------------------------------
# realized environment


@dataclass(frozen=True)
class EnvSpec:
    law: EnvLaw
    shape: ChiShape
    params: ParamFamily

    def to_dict(self) -> dict:
        return {"law": self.law.to_dict(), "chi": self.shape.to_list(), "params": self.params.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "EnvSpec":
        return cls(EnvLaw.from_dict(d["law"]), ChiShape(tuple(map(tuple, d["chi"]))),
                   ParamFamily.from_dict(d["params"]))


@dataclass(frozen=True)
class Environment:
    """A seeded, lazily realized environment field."""

    spec: EnvSpec
    master_seed: int = 0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def law(self) -> EnvLaw:
        return self.spec.law

    @property
    def params(self) -> ParamFamily:
        return self.spec.params

    @property
    def shape(self) -> ChiShape:
        return self.spec.shape

    def with_seed(self, seed: int) -> "Environment":
        return Environment(self.spec, seed)

    def rho_many(self, heights, digits) -> np.ndarray:
        """Vectorized ``rho`` for many vertices (see :func:`hash_vertices`)."""
        heights = np.atleast_1d(heights)
        if self.law.is_degenerate:
            return np.full(len(heights), self.law.values[int(np.argmax(self.law.w))])
        return self.law.quantile(hash_to_unit(hash_vertices(self.master_seed, heights, digits)))

    def rho_at(self, xi: TreeAddress) -> float:
        key = (xi.base.digits, xi.height)
        val = self._cache.get(key)
        if val is None:
            digits = np.asarray([xi.base.digits], dtype=np.int64).reshape(1, -1)
            val = float(self.rho_many([xi.height], digits)[0])
            self._cache[key] = val
        return val

    def lambda_at(self, xi: TreeAddress) -> float:
        return float(self.params.lam(xi.height)) * self.rho_at(xi)

    def chi_at(self, xi: TreeAddress) -> list:
        """Atoms ``(r, mass)`` of ``rho^xi * shape``; total mass is ``rho^xi``."""
        rho = self.rho_at(xi)
        return [(r, rho * w) for r, w in self.shape.atoms]

    def level_table(self, level: int, K: int, N: int) -> np.ndarray:
        """``rho`` of every height-``level`` vertex inside ``B_K(0)``.

        Entry ``m`` belongs to the vertex whose digits at positions
        ``level..K-1`` are the base-``N`` digits of ``m``; a leaf with
        integer label ``idx`` (see ``HierAddress.to_index``) sits below
        entry ``idx // N**level``.
        """
        count = N ** (K - level)
        m = np.arange(count, dtype=np.int64)
        digits = np.zeros((count, K), dtype=np.int64)
        rem = m.copy()
        for pos in range(level, K):
            digits[:, pos] = rem % N
            rem //= N
        return self.rho_many(np.full(count, level), digits)

    def spine(self, levels, seeds=None) -> np.ndarray:
        """``rho`` along the ancestral line of the origin.

        With ``seeds`` given, returns a (len(seeds), len(levels)) matrix of
        independent environment replicas.
        """
        levels = np.asarray(levels, dtype=np.int64)
        if seeds is None:
            return self.rho_many(levels, np.zeros((len(levels), 0), np.int64))
        seeds = np.asarray(seeds, dtype=np.uint64)
        if self.law.is_degenerate:
            return np.full((len(seeds), len(levels)), self.law.values[int(np.argmax(self.law.w))])
        S, L = np.meshgrid(seeds, levels, indexing="ij")
        h = hash_vertices(S.ravel(), L.ravel(), np.zeros((S.size, 0), np.int64))
        return self.law.quantile(hash_to_unit(h)).reshape(S.shape)


# ---------------------------------------------------------------------------
# validation


@dataclass
class EnvReport:
    N: int
    migration_growth_ok: Optional[bool]
    resampling_growth_ok: Optional[bool]
    growth_exact: bool
    mean: float
    second_moment: float
    mean_one: bool
    bounded_support: bool
    delta: float
    zero_environment: bool
    positive_rates: bool
    messages: list

    @property
    def ok(self) -> bool:
        return bool(self.migration_growth_ok is not False and self.resampling_growth_ok is not False
                    and (self.mean_one or self.zero_environment))

    def to_dict(self) -> dict:
        return dict(self.__dict__, ok=self.ok)


def validate(spec: EnvSpec, N: int) -> EnvReport:
    """Check growth conditions for ``N`` and the moment conditions on the law."""
    msgs = []
    rc, rl, exact = spec.params.growth_rates()
    logN = math.log(N)
    mig = bool(rc < logN) if np.isfinite(rc) else None
    res = bool(rl < logN) if np.isfinite(rl) or rl == -np.inf else None
    if not exact:
        msgs.append("growth rates estimated from explicit data (tail maximum of log(x_k)/k)")
    if mig is False:
        msgs.append(f"migration growth violated: limsup log(c_k)/k = {rc:.6g} >= log N = {logN:.6g}")
    if res is False:
        msgs.append(f"resampling growth violated: limsup log(lambda_k)/k = {rl:.6g} >= log N = {logN:.6g}")

    law = spec.law
    mean, m2 = law.mean, law.second_moment
    mean_one = math.isclose(mean, 1.0, abs_tol=1e-12)
    support = [v for v, w in zip(law.values, law.weights) if w > 0]
    lo, hi = min(support), max(support)
    zero = hi == 0.0
    bounded = lo > 0
    delta = min(lo, 1.0 / hi) if bounded else 0.0
    if zero:
        msgs.append("zero environment; valid only as comparison baseline")
    elif not mean_one:
        msgs.append(f"law mean {mean:.12g} differs from 1")
    if not bounded and not zero:
        msgs.append("support touches 0: bounded-support condition fails")

    k = np.arange(spec.params.length or 64)
    positive = bool(np.all(spec.params.c(k) > 0) and np.all(spec.params.lam(k) > 0))
    if not positive:
        msgs.append("some c_k or lambda_k is not strictly positive")
    return EnvReport(N, mig, res, exact, mean, m2, mean_one, bounded, delta, zero, positive, msgs)
