"""Interaction chains: variance profiles and cluster-formation classes.

The block averages seen across scales form a Markov chain indexed by the
level.  Started from ``theta`` at level ``j``, the variance it accumulates
down to level 0 is ``var_theta(f)`` times ``1 - prod_k f_k`` with factors

    f_k = 2 c_k / (2 c_k + lambda_k rho_k + 2 d_k),

``rho_k`` being the environment on the ancestral line of the site.  The
product tends to zero exactly in the clustering regime.  Within that
regime the scaling case of the volatilities selects one of five
cluster-formation classes; :func:`cluster_class` maps a scaling case to
its class and constants and :func:`delta_limit` evaluates the finite-level
variance increments whose limits identify the diffusive classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .environment import Environment, derive_seed
from .hiergroup import HierAddress, ancestor
from .renorm import ScalingClass, VolatilityTrace

IN_PROBABILITY = ("convergence holds in probability with respect to the environment, "
                  "not almost surely")


@dataclass
class VarianceProfile:
    j: int
    rho: np.ndarray
    factors_quenched: np.ndarray
    factors_annealed: np.ndarray

    @property
    def product_quenched(self) -> np.ndarray:
        return np.cumprod(self.factors_quenched)

    @property
    def product_annealed(self) -> np.ndarray:
        return np.cumprod(self.factors_annealed)

    def within_variance(self, var_theta: float = 1.0) -> float:
        """Expected within-distribution variance ``prod * var_theta(f)``."""
        return float(self.product_quenched[-1] * var_theta)

    def table(self) -> dict:
        return {"k": np.arange(self.j + 1), "rho": self.rho, "factor_quenched": self.factors_quenched,
                "factor_annealed": self.factors_annealed, "product_quenched": self.product_quenched,
                "product_annealed": self.product_annealed}


def variance_profile(env: Environment, params, trace: VolatilityTrace, j: int,
                     eta: Optional[HierAddress] = None, N: int = 2) -> VarianceProfile:
    """Per-level variance factors up to level ``j`` along the ancestral line of ``eta``."""
    if j > trace.kmax:
        raise ValueError(f"level {j} exceeds trace length {trace.kmax}")
    if eta is None:
        eta = HierAddress.zero(N)
    k = np.arange(j + 1)
    rho = np.array([env.rho_at(ancestor(eta, int(i))) for i in k])
    c, lam, d = trace.c[: j + 1], params.lam(k), trace.d[: j + 1]
    fq = 2 * c / (2 * c + lam * rho + 2 * d)
    fa = 2 * c / (2 * c + lam * env.law.mean + 2 * d)
    return VarianceProfile(j, rho, fq, fa)


# ---------------------------------------------------------------------------
# cluster classes


@dataclass(frozen=True)
class TrapKernel:
    """``K(theta, .) = sum_u theta_u delta_{delta_u}``: jump to a pure type."""

    def atoms(self, theta):
        theta = np.asarray(theta, dtype=float)
        eye = np.eye(len(theta))
        return [(float(theta[u]), eye[u]) for u in range(len(theta)) if theta[u] > 0]

    def mean(self, theta) -> np.ndarray:
        return sum(w * point for w, point in self.atoms(theta))


@dataclass
class ClusterClass:
    regime: Optional[str]
    source_case: str
    description: str
    constants: dict = field(default_factory=dict)
    convergence: str = "almost sure"
    notes: list = field(default_factory=list)

    @property
    def classified(self) -> bool:
        return self.regime is not None

    @property
    def kernel(self):
        return TrapKernel() if self.regime == "I1" else None

    def h(self, j: int, params) -> float:
        """Scale function of the fast class: ``1/sqrt(K_j)`` or ``1/Kbar_j``."""
        if self.regime != "II1":
            raise ValueError("h(j) is defined for the fast diffusive class only")
        if self.constants.get("h") == "1/Kbar_j":
            return 1.0 / _kbar(params, j)
        return 1.0 / math.sqrt(_K(params, j))

    def k_alpha(self, j: int, alpha: float, params=None) -> int:
        """Level ``k_alpha(j)`` whose block average is observed at scale ``alpha``."""
        if self.regime in ("I1", "I2"):
            return max(0, j + 1 - int(alpha))
        if self.regime == "II1":
            return max(0, math.floor(j + 1 - alpha * self.h(j, params)))
        if self.regime == "II2":
            return math.floor((1 - alpha) * (j + 1))
        raise ValueError(f"no level scaling for regime {self.regime}")

    def time_change(self, alpha: float) -> float:
        """Fleming-Viot time at which the limit is observed at scale ``alpha``."""
        if self.regime == "II1":
            return self.constants["ell_factor"] * alpha
        if self.regime == "II2":
            return math.log(1.0 / (1.0 - alpha) ** self.constants["R"])
        raise ValueError(f"no time change for regime {self.regime}")

    def to_dict(self) -> dict:
        return {"regime": self.regime, "source_case": self.source_case, "description": self.description,
                "constants": self.constants, "convergence": self.convergence, "notes": list(self.notes)}


def cluster_class(scaling: ScalingClass) -> ClusterClass:
    case, k = scaling.case, scaling.constants
    if case in ("a", "A"):
        return ClusterClass("I1", case, "concentrated clustering, trapped after one step: "
                            "kernel K(theta, .) = sum_u theta_u delta_{delta_u}")
    if case == "b":
        return ClusterClass("I2", case, "concentrated clustering, environment-driven Markov chain",
                            {"M_tilde": k["M"], "K_tilde": k["K"]})
    if case == "B":
        return ClusterClass("I2", case, "concentrated clustering, environment-driven Markov chain",
                            {"M_tilde": k["Mbar"] / k["c"], "K_tilde": k["Kbar"]})
    if case == "C1" or (case == "C3" and k.get("subcase") == "first"):
        c = k["c"]
        return ClusterClass("I2", case, "concentrated clustering, environment-driven Markov chain",
                            {"M_tilde": (1 - c) / c, "K_tilde": 0.0})
    if case == "c":
        return ClusterClass("II1", case, "fast diffusive clustering, time-changed Fleming-Viot",
                            {"ell_factor": 1.0, "h": "1/sqrt(K_j)"}, IN_PROBABILITY)
    if case == "C2":
        mu = k["mu"]
        if k["kKbar_limit"] == math.inf:
            return ClusterClass("II1", case, "fast diffusive clustering, time-changed Fleming-Viot",
                                {"ell_factor": mu / (mu - 1), "h": "1/Kbar_j"}, IN_PROBABILITY)
        if 0 < k["kKbar_limit"] < math.inf:
            R = k["kKbar_limit"] * mu / (mu - 1)
            return ClusterClass("II2", case, "moderate diffusive clustering, time-changed Fleming-Viot",
                                {"R": R, "Nbar": k["kKbar_limit"]}, IN_PROBABILITY)
        return ClusterClass(None, case, "no classification",
                            notes=["k Kbar_k has no limit in (0, inf]: outside the class mapping"])
    if case == "d":
        R = k["M"] * (1 - k["a"])
        return ClusterClass("II2", case, "moderate diffusive clustering, time-changed Fleming-Viot",
                            {"R": R, "M": k["M"], "a": k["a"]}, IN_PROBABILITY)
    if case == "C3" and k.get("subcase") == "second":
        return ClusterClass("II2", case, "moderate diffusive clustering, time-changed Fleming-Viot",
                            {"R": 1 - k["abar"]}, IN_PROBABILITY)
    notes = list(scaling.notes)
    if case == "e":
        notes.append("slow clustering (II3) is expected here, but no limit is known")
    return ClusterClass(None, case, "no classification", notes=notes)


# ---------------------------------------------------------------------------
# variance increments across scales


def _K(params, k):
    return params.mu(k) / params.c(k)


def _kbar(params, k):
    p = params.params
    k = np.asarray(k, dtype=float)
    return p["const_mu"] * (k + 1) ** p["bbar"] / (p["const_c"] * (k + 1) ** p["abar"])


def _window(lo: float, hi: float):
    """Integers inside the real window [lo, hi]."""
    return max(0, math.ceil(lo - 1e-12)), math.floor(hi + 1e-12)


def _scaled_sum(weights: np.ndarray, rates: np.ndarray) -> float:
    """``sum_k w_k exp(-sum_{l=k+1}^{top} rate_l)`` over a window."""
    tail = np.concatenate([np.cumsum(rates[::-1])[::-1][1:], [0.0]])
    return float(np.sum(weights * np.exp(-tail)))


@dataclass(frozen=True)
class DeltaResult:
    delta: float
    limit: float
    window: tuple

    @property
    def gap(self) -> float:
        return abs(self.delta - self.limit)

    def to_dict(self) -> dict:
        return {"delta": self.delta, "limit": self.limit, "gap": self.gap, "window": list(self.window)}


def delta_limit(params, scaling: ScalingClass, alpha1: float, alpha2: float, j: int) -> DeltaResult:
    """Scaled variance increment between scales ``alpha2 < alpha1`` at level ``j``.

    The level window ``[k_alpha1(j), k_alpha2(j)]`` is taken as the integers
    inside the real interval, and the sum is compared with its closed-form
    limit.
    """
    if alpha1 < alpha2:
        raise ValueError("need alpha2 <= alpha1")
    case, k = scaling.case, scaling.constants
    cls = cluster_class(scaling)
    if case == "c" or (case == "C2" and cls.regime == "II1"):
        if case == "c":
            Kj = float(_K(params, j))
            hj, factor = 1.0 / math.sqrt(Kj), 1.0
        else:
            hj, factor = 1.0 / float(_kbar(params, j)), k["mu"] / (k["mu"] - 1)
        lo, hi = _window(j + 1 - alpha1 * hj, j + 1 - alpha2 * hj)
        ks = np.arange(lo, hi + 1)
        if case == "c":
            K = _K(params, ks)
            delta = _scaled_sum(np.sqrt(K), K + np.sqrt(K))
        else:
            Kb = _kbar(params, ks)
            delta = _scaled_sum(factor * Kb, factor * Kb)
        limit = 1.0 - math.exp(-factor * (alpha1 - alpha2))
    elif cls.regime == "II2":
        R = cls.constants["R"]
        if alpha1 >= 1:
            raise ValueError("moderate class needs alpha1 < 1")
        lo, hi = _window((1 - alpha1) * (j + 1), (1 - alpha2) * (j + 1))
        ks = np.arange(max(lo, 1), hi + 1)
        K = _K(params, ks)
        delta = _scaled_sum(R / ks, K + R / ks)
        limit = 1.0 - ((1 - alpha1) / (1 - alpha2)) ** R
    else:
        raise ValueError(f"case {case!r} has no variance-increment limit")
    if alpha1 == alpha2:
        delta = 0.0
    return DeltaResult(delta, limit, (lo, hi))


def delta_trace(trace: VolatilityTrace, j1: int, j2: int) -> float:
    """Unscaled increment ``sum_{k=j1}^{j2} d_{k+1}/c_k exp(-sum_{l=k+1}^{j2} (mu_l+d_l)/c_l)``."""
    if not 0 <= j1 <= j2 < trace.kmax:
        raise ValueError("window outside trace")
    ks = np.arange(j1, j2 + 1)
    m = (trace.mu[ks] + trace.d[ks]) / trace.c[ks]
    return _scaled_sum(trace.d[ks + 1] / trace.c[ks], m)


# ---------------------------------------------------------------------------
# weak law of large numbers along the ancestral line


@dataclass
class WLLNResult:
    j1: int
    j2: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    max_chi: np.ndarray
    replicas: int

    def to_dict(self) -> dict:
        return {"j1": self.j1, "j2": self.j2.tolist(), "mean": self.mean.tolist(),
                "variance": self.variance.tolist(), "max_chi": self.max_chi.tolist(),
                "replicas": self.replicas}


def wlln_check(env: Environment, params, trace: VolatilityTrace, j1: int, j2, replicas: int,
               seed: int = 0) -> WLLNResult:
    """Sample ``S(j1, j2) = sum_{k=j1}^{j2} (mu_k rho_k + d_k)/c_k`` over
    independent environments and report the spread of ``S / E[S]``."""
    j2 = np.atleast_1d(np.asarray(j2, dtype=int))
    if np.any(j2 <= j1):
        raise ValueError("need j2 > j1")
    top = int(j2.max())
    if top > trace.kmax:
        raise ValueError(f"level {top} exceeds trace length {trace.kmax}")
    ks = np.arange(j1, top + 1)
    c, mu, d = trace.c[ks], trace.mu[ks], trace.d[ks]
    seeds = np.array([derive_seed(seed, r) for r in range(replicas)], dtype=np.uint64)
    rho = env.spine(ks, seeds)
    m = (mu * rho + d) / c
    cum = np.cumsum(m, axis=1)
    mean_m = (mu * env.law.mean + d) / c
    chi_num = mu / c
    out_mean, out_var, out_chi = [], [], []
    for top_j in j2:
        n = top_j - j1
        ratio = cum[:, n] / np.sum(mean_m[: n + 1])
        out_mean.append(ratio.mean())
        out_var.append(ratio.var(ddof=1) if replicas > 1 else 0.0)
        out_chi.append(np.max(chi_num[: n + 1]) / np.sum((mu[: n + 1] + d[: n + 1]) / c[: n + 1]))
    return WLLNResult(j1, j2, np.array(out_mean), np.array(out_var), np.array(out_chi), replicas)
