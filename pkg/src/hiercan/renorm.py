"""The volatility recursion and its scaling analysis.

The block volatilities obey

    d_{k+1} = E[ c_k (mu_k rho + d_k) / (c_k + mu_k rho + d_k) ],

the mean of a random Mobius map applied to ``d_k``.  Running the same
recursion with ``rho = 0`` and ``rho = 1`` gives the two companion traces
that sandwich the quenched one.  Expectations are exact sums over the
atoms of the law.

The classifiers decide which scaling case a polynomial or exponential
family falls into from the family parameters alone; ``verify_scaling``
compares a computed trace with the prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .asymptotics import Asym
from .environment import EnvLaw

UNRESOLVED = "unresolved"


@dataclass
class VolatilityTrace:
    """``d_k`` for ``k = 0..kmax`` with the zero- and average-environment traces."""

    c: np.ndarray
    mu: np.ndarray
    d: np.ndarray
    d_zero: np.ndarray
    d_one: np.ndarray
    d0: float

    @property
    def kmax(self) -> int:
        return len(self.d) - 1

    @property
    def k(self) -> np.ndarray:
        return np.arange(len(self.d))

    @property
    def sigma(self) -> np.ndarray:
        """``sigma_k = sum_{l<k} 1/c_l`` (``sigma_0 = 0``)."""
        return np.concatenate([[0.0], np.cumsum(1.0 / self.c[:-1])])

    @property
    def ratio_c(self) -> np.ndarray:
        return self.d / self.c

    @property
    def ratio_mu(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.d / self.mu

    @property
    def ratio_geo(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.d / np.sqrt(self.c * self.mu)

    @property
    def sigma_d(self) -> np.ndarray:
        return self.sigma * self.d

    def diagnostic(self, name: str) -> np.ndarray:
        return {"d/c": self.ratio_c, "d/mu": self.ratio_mu, "d/sqrt(c mu)": self.ratio_geo,
                "sigma d": self.sigma_d}[name]

    def table(self) -> dict:
        return {"k": self.k, "d": self.d, "d_zero": self.d_zero, "d_one": self.d_one,
                "c": self.c, "mu": self.mu, "d_over_c": self.ratio_c,
                "d_over_sqrt_c_mu": self.ratio_geo, "sigma_d": self.sigma_d}


def mobius_mean(c, mu, law: EnvLaw, x):
    """``E[c (mu rho + x) / (c + mu rho + x)]``; broadcasts over ``c, mu, x``."""
    c, mu, x = (np.asarray(v, dtype=float)[..., None] for v in (c, mu, x))
    return law.expect(lambda rho: c * (mu * rho + x) / (c + mu * rho + x))


def recurse(params, law: EnvLaw, d0: float = 1.0, kmax: int = 1000) -> VolatilityTrace:
    """Run the volatility recursion up to ``kmax``."""
    if d0 < 0:
        raise ValueError("d0 must be >= 0")
    with np.errstate(over="ignore"):
        c, lam = params.sequences(kmax)
    bad = ~(np.isfinite(c) & np.isfinite(lam))
    if bad.any():
        raise ValueError(f"rates overflow at level {int(np.argmax(bad))}; lower kmax")
    mu = 0.5 * lam
    rho, w = law.v, law.w
    d = np.empty(kmax + 1)
    dz = np.empty(kmax + 1)
    d1 = np.empty(kmax + 1)
    d[0] = dz[0] = d1[0] = d0
    for k in range(kmax):
        ck, mk = c[k], mu[k]
        a = mk * rho + d[k]
        d[k + 1] = float(w @ (ck * a / (ck + a)))
        dz[k + 1] = ck * dz[k] / (ck + dz[k])
        a1 = mk + d1[k]
        d1[k + 1] = ck * a1 / (ck + a1)
    return VolatilityTrace(c, mu, d, dz, d1, float(d0))


# ---------------------------------------------------------------------------
# fixed points


@dataclass(frozen=True)
class FixedPoint:
    value: float
    residual: float
    beta: float
    variant: str
    K: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _fixed_map(K, law, variant, c):
    if variant == "poly":
        return lambda x: float(law.expect(lambda rho: (K * rho + x) / (1.0 + K * rho + x)))
    if variant == "exp":
        if c is None or c <= 0:
            raise ValueError("exponential variant needs c > 0")
        return lambda x: float(law.expect(lambda rho: (c * K * rho + x) / (c + c * K * rho + x)))
    raise ValueError(f"unknown variant {variant!r}")


def fixed_point(K: float, law: EnvLaw, variant: str = "poly", c: Optional[float] = None,
                tol: float = 1e-12) -> FixedPoint:
    """Unique root in (0, 1) of ``M = g(M)``.

    ``variant="poly"``: ``g(x) = E[(K rho + x)/(1 + K rho + x)]``;
    ``variant="exp"``:  ``g(x) = E[(cK rho + x)/(c + cK rho + x)]``.
    Bisection on [0, 1] (``g`` is increasing and strictly concave with
    ``g(0) > 0`` and ``g(1) < 1``), then Newton steps to polish.
    """
    if not K > 0 or not math.isfinite(K):
        raise ValueError(f"K must lie in (0, inf), got {K}")
    g = _fixed_map(K, law, variant, c)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > mid:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        eps = 1e-7 * max(x, 1e-300)
        slope = (g(x + eps) - g(x - eps)) / (2 * eps)
        step = (g(x) - x) / (1.0 - slope)
        if not abs(step) < 10 * tol:
            break
        x += step
    return FixedPoint(x, abs(g(x) - x), 1.0 - g(0.0) / x, variant, float(K))


# ---------------------------------------------------------------------------
# scaling classes


@dataclass
class ScalingClass:
    family: str
    case: str
    diagnostic: Optional[str]
    predicted: Optional[float]
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def resolved(self) -> bool:
        return self.case != UNRESOLVED and self.case != "e"

    def to_dict(self) -> dict:
        return {"family": self.family, "case": self.case, "diagnostic": self.diagnostic,
                "predicted": self.predicted, "constants": self.constants, "notes": list(self.notes)}


def _lim(num: Asym, den: Asym) -> float:
    return (num / den).limit() if not num.is_zero else 0.0


def classify_polynomial(a: float, b: float, L_c=(1.0, 0.0), L_mu=(1.0, 0.0),
                        law: EnvLaw = EnvLaw.dirac(1.0)) -> ScalingClass:
    """Scaling case for ``c_k ~ L_c(k) k^a``, ``mu_k ~ L_mu(k) k^b``.

    ``L_c`` and ``L_mu`` are ``(constant, gamma)`` pairs standing for
    ``constant * (log k)^gamma``.
    """
    (cc, gc), (cm, gm) = L_c, L_mu
    if cc <= 0 or cm < 0:
        raise ValueError("need a positive c-constant and a non-negative mu-constant")
    c = Asym(cc, 1.0, a, gc)
    mu = Asym(cm, 1.0, b, gm) if cm else Asym.zero()
    K = _lim(mu, c)
    L = _lim(mu * Asym(1.0, 1.0, 2.0), c)
    consts = {"a": a, "b": b, "K": K, "L": L}
    if K == math.inf:
        return ScalingClass("polynomial", "a", "d/c", 1.0, consts)
    if K > 0:
        fp = fixed_point(K, law)
        consts.update(M=fp.value, beta=fp.beta)
        return ScalingClass("polynomial", "b", "d/c", fp.value, consts)
    if L == math.inf:
        return ScalingClass("polynomial", "c", "d/sqrt(c mu)", 1.0, consts)
    # sigma_k = sum 1/c_l diverges iff (a < 1) or (a == 1 and gamma_c <= 1)
    sigma_diverges = not c.inverse().series_converges()
    if a < 1:
        M = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * L / (1.0 - a) ** 2))
        consts["M"] = M
        return ScalingClass("polynomial", "d", "sigma d", M, consts)
    if sigma_diverges:
        return ScalingClass("polynomial", "e", None, None, consts,
                            ["boundary case a = 1 with divergent sigma_k: no scaling result is known"])
    return ScalingClass("polynomial", UNRESOLVED, None, None, consts,
                        ["sigma_k converges: parameters lie outside the clustering regime"])


def classify_exponential(c: float, mu: float, abar: float = 0.0, bbar: float = 0.0,
                         law: EnvLaw = EnvLaw.dirac(1.0), const_c: float = 1.0,
                         const_mu: float = 1.0) -> ScalingClass:
    """Scaling case for ``c_k = c^k cbar_k``, ``mu_k = mu^k mubar_k`` with
    ``cbar_k ~ const_c k^abar`` and ``mubar_k ~ const_mu k^bbar``."""
    if c <= 0 or mu <= 0:
        raise ValueError("need c, mu > 0")
    cbar = Asym(const_c, 1.0, abar)
    mubar = Asym(const_mu, 1.0, bbar) if const_mu else Asym.zero()
    Kbar_seq = mubar / cbar if not mubar.is_zero else Asym.zero()
    Kbar = Kbar_seq.limit()
    kKbar = (Kbar_seq * Asym(1.0, 1.0, 1.0)).limit()
    consts = {"c": c, "mu": mu, "abar": abar, "bbar": bbar, "Kbar": Kbar, "kKbar_limit": kKbar}
    eq = math.isclose(c, mu, rel_tol=1e-12)
    if (c < mu and not eq) or (eq and Kbar == math.inf):
        return ScalingClass("exponential", "A", "d/c", 1.0 / c, consts)
    if eq and 0 < Kbar < math.inf:
        fp = fixed_point(Kbar, law, "exp", c)
        consts.update(Mbar=fp.value, beta=fp.beta)
        return ScalingClass("exponential", "B", "d/c", fp.value / c, consts)
    if Kbar == 0:
        if eq and c < 1:
            consts["Mtilde"] = (1 - c) / c
            return ScalingClass("exponential", "C1", "d/c", (1.0 - c) / c, consts)
        if eq and c > 1:
            if not Kbar_seq.series_converges():
                return ScalingClass("exponential", "C2", "d/mu", 1.0 / (mu - 1.0), consts)
            return ScalingClass("exponential", UNRESOLVED, None, None, consts,
                                ["c = mu > 1 with summable Kbar_k: outside the stated cases"])
        if c < 1 and not eq:
            consts["subcase"] = "first"
            return ScalingClass("exponential", "C3", "sigma d", 1.0, consts)
        if math.isclose(c, 1.0, rel_tol=1e-12) and not eq:
            if abar < 1:
                consts["subcase"] = "second"
                return ScalingClass("exponential", "C3", "sigma d", 1.0, consts)
            return ScalingClass("exponential", UNRESOLVED, None, None, consts,
                                ["critical exponent a = 1 with c = 1 > mu: no scaling result is known"])
    return ScalingClass("exponential", UNRESOLVED, None, None, consts,
                        ["parameters outside the cases covered by the exponential scaling theorem"])


def classify_family(params, law: EnvLaw = EnvLaw.dirac(1.0)) -> ScalingClass:
    """Dispatch on a closed-form :class:`ParamFamily`."""
    p = params.params
    if params.kind == "polynomial":
        return classify_polynomial(p["a"], p["b"], (p["const_c"], p["gamma_c"]),
                                   (p["const_mu"], p["gamma_mu"]), law)
    if params.kind == "exponential":
        return classify_exponential(p["c"], p["mu"], p["abar"], p["bbar"], law,
                                    p["const_c"], p["const_mu"])
    return ScalingClass("explicit", UNRESOLVED, None, None, {},
                        ["explicit data: limits cannot be evaluated symbolically"])


@dataclass
class ScalingVerdict:
    case: str
    diagnostic: str
    window: tuple
    observed: float
    extrapolated: float
    predicted: float
    error: float

    def passed(self, tol: float) -> bool:
        return self.error < tol

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_scaling(trace: VolatilityTrace, cls: ScalingClass, k_window=None) -> ScalingVerdict:
    """Compare the case's diagnostic ratio with its predicted limit.

    ``observed`` is the ratio at the end of the window; ``extrapolated`` is
    the intercept of a least-squares fit of the ratio against ``1/k`` over
    the window.  ``error`` uses ``observed``.
    """
    if not cls.resolved:
        raise ValueError(f"case {cls.case!r} has no scaling prediction")
    if k_window is None:
        k_window = (max(1, trace.kmax // 2), trace.kmax)
    lo, hi = k_window
    if hi > trace.kmax or lo < 1 or lo > hi:
        raise ValueError(f"window {k_window} outside trace of length {trace.kmax}")
    ratio = trace.diagnostic(cls.diagnostic)
    seg = ratio[lo:hi + 1]
    observed = float(seg[-1])
    if hi > lo:
        slope, icpt = np.polyfit(1.0 / np.arange(lo, hi + 1), seg, 1)
        extrapolated = float(icpt)
    else:
        extrapolated = observed
    return ScalingVerdict(cls.case, cls.diagnostic, (lo, hi), observed, extrapolated,
                          float(cls.predicted), abs(observed - cls.predicted))


# ---------------------------------------------------------------------------
# stability substitution


@dataclass
class StabilityResult:
    r: np.ndarray
    d_direct: np.ndarray
    d_substituted: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.max(np.abs(self.d_direct - self.d_substituted)))


def stability_substitution(params, law: EnvLaw, d0: float = 1.0, kmax: int = 1000) -> StabilityResult:
    """Rewrite the quenched recursion as a homogeneous one with ``mu_k r_k``.

    With ``K_k = mu_k/c_k`` and ``X = c_k(1 + K_k rho) + d_k``,
    ``r_k = E[c_k rho / X] / E[c_k / X]``; feeding ``mu_k r_k`` into the
    deterministic map ``c(m + d)/(c + m + d)`` reproduces the quenched
    ``d_{k+1}``.
    """
    trace = recurse(params, law, d0, kmax)
    c, mu, d = trace.c, trace.mu, trace.d
    rho, w = law.v, law.w
    r = np.empty(kmax)
    ds = np.empty(kmax + 1)
    ds[0] = d0
    for k in range(kmax):
        X = c[k] + mu[k] * rho + d[k]
        Nk = float(w @ (c[k] * rho / X))
        Dk = float(w @ (c[k] / X))
        r[k] = Nk / Dk
        m = mu[k] * r[k]
        ds[k + 1] = c[k] * (m + ds[k]) / (c[k] + m + ds[k])
    return StabilityResult(r, d, ds)
