"""Coexistence versus clustering.

Two lineages coalesce with probability one (clustering) exactly when

    sum_k  1/(c_k + lambda_{k+1}/N) * sum_{l<=k} lambda_l  = infinity

for finite ``N``; in the hierarchical mean-field limit ``N -> infinity``
the criterion drops the ``lambda_{k+1}/N`` term.  For polynomial and
exponential families the decision is made on growth classes (exponents
and bases are compared, never extrapolated from numbers); explicit finite
sequences only get partial sums and an ``undecided`` verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .asymptotics import Asym, family_classes

CLUSTERING = "clustering"
COEXISTENCE = "coexistence"
UNDECIDED = "undecided"

# Thresholds used when corroborating a verdict by simulation.  These are
# choices of this library, not constants of the theory.
CLUSTER_THRESHOLD = 0.95
PLATEAU_CEILING = 0.9


@dataclass
class RegularityReport:
    holds: Optional[bool]
    first_branch: Optional[bool]
    second_branch: Optional[bool]
    method: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DichotomyVerdict:
    regime: str
    criterion: str
    N: Optional[int]
    partial_sums: np.ndarray
    decided: bool
    term_class: str = ""
    regularity: Optional[RegularityReport] = None
    corroboration: Optional[dict] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "regime": self.regime,
            "criterion": self.criterion,
            "N": self.N,
            "decided": self.decided,
            "term_class": self.term_class,
            "partial_sums_tail": [float(x) for x in self.partial_sums[-5:]],
            "partial_sums_length": int(len(self.partial_sums)),
            "notes": list(self.notes),
        }
        if self.regularity is not None:
            out["regularity"] = self.regularity.to_dict()
        if self.corroboration is not None:
            out["corroboration"] = self.corroboration
        return out


def criterion_partial_sums(params, N=None, kmax: int = 200) -> np.ndarray:
    """Partial sums of the criterion series for ``k = 0..kmax``.

    With ``N=None`` the limiting criterion ``sum (1/c_k) sum_{l<=k} lambda_l``
    is used.  Explicit families are truncated to the available data.
    """
    if params.length is not None:
        kmax = min(kmax, params.length - 2)
    k = np.arange(kmax + 1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        c = params.c(k)
        lam_cum = np.cumsum(params.lam(k))
        denom = c if N is None else c + params.lam(k + 1) / N
        terms = lam_cum / denom
    terms = np.where(np.isnan(terms), np.inf, terms)
    return np.cumsum(terms)


def _criterion_class(params, N) -> Asym:
    c, lam = family_classes(params)
    denom = c if N is None else c + lam.shift(1).scale(1.0 / N)
    return lam.partial_sum() / denom


def _classify(params, N, kmax) -> DichotomyVerdict:
    sums = criterion_partial_sums(params, N, kmax)
    criterion = "limit" if N is None else "finite-N"
    if params.kind == "explicit":
        return DichotomyVerdict(UNDECIDED, criterion, N, sums, False,
                                notes=["explicit finite data: convergence cannot be decided from a prefix"])
    term = _criterion_class(params, N)
    regime = COEXISTENCE if term.series_converges() else CLUSTERING
    notes = []
    if N is not None:
        notes.append("finite-N claims assume the bounded-support condition on the environment law")
    return DichotomyVerdict(regime, criterion, N, sums, True, term.describe(), notes=notes)


def classify_finite_N(params, N: int, kmax: int = 200) -> DichotomyVerdict:
    """Verdict of the finite-``N`` criterion."""
    if N < 2:
        raise ValueError("N must be >= 2")
    return _classify(params, N, kmax)


def classify_limit(params, kmax: int = 200) -> DichotomyVerdict:
    """Verdict of the ``N -> infinity`` criterion."""
    return _classify(params, None, kmax)


def _tail_trend(x: np.ndarray) -> str:
    """Crude limit of a positive numeric sequence: '0', 'inf' or 'finite'.

    Fits the log-log slope over the second half of the data.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    k = np.arange(n // 2, n) + 1.0
    y = x[n // 2:]
    if np.any(y <= 0):
        return "0"
    slope = np.polyfit(np.log(k), np.log(y), 1)[0]
    if slope > 0.5:
        return "inf"
    if slope < -0.5:
        return "0"
    return "finite"


def regularity_check(params) -> RegularityReport:
    """Weak regularity: limsup lam_{k+1}/c_k < inf, or
    liminf min(lam_{k+1}/c_k, lam_k/lam_{k+1}) > 0."""
    if params.kind != "explicit":
        c, lam = family_classes(params)
        if lam.is_zero:
            return RegularityReport(True, True, False, "symbolic", {"ratio_limit": 0.0})
        ratio = lam.shift(1) / c
        r_lim = ratio.limit()
        step_lim = 1.0 / lam.base  # lam_k / lam_{k+1}
        first = r_lim < math.inf
        second = r_lim > 0 and step_lim > 0
        return RegularityReport(first or second, first, second, "symbolic",
                                {"ratio_limit": r_lim, "step_limit": step_lim})
    n = params.length
    if n < 8:
        return RegularityReport(None, None, None, "numeric-tail", {"reason": "too few terms"})
    k = np.arange(n - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = params.lam(k + 1) / params.c(k)
        step = params.lam(k) / params.lam(k + 1)
    r_trend, s_trend = _tail_trend(ratio), _tail_trend(step)
    first = r_trend != "inf"
    second = r_trend != "0" and s_trend != "0"
    return RegularityReport(first or second, first, second, "numeric-tail",
                            {"ratio_trend": r_trend, "step_trend": s_trend,
                             "note": "heuristic log-log tail fit on explicit data"})


def corroborate(params, env, N: int, level_cut: int, horizons, replicas: int, seed: int,
                workers: int = 1, verdict: Optional[DichotomyVerdict] = None) -> dict:
    """Monte Carlo pair-coalescence check of a verdict.

    Clustering is corroborated when the estimates increase along the
    horizon schedule and exceed ``CLUSTER_THRESHOLD`` at the end;
    coexistence when the last two estimates agree within 3 sigma and stay
    below ``PLATEAU_CEILING``.
    """
    from .coalescent import pair_coalescence_estimate

    if verdict is None:
        verdict = classify_finite_N(params, N)
    est = pair_coalescence_estimate(env, N, level_cut, horizons, replicas, seed, workers=workers)
    p, se = est.prob, est.stderr
    increasing = bool(np.all(np.diff(p) >= -3 * np.hypot(se[1:], se[:-1])))
    plateau = bool(abs(p[-1] - p[-2]) <= 3 * math.hypot(se[-1], se[-2])) if len(p) > 1 else False
    if verdict.regime == CLUSTERING:
        ok = increasing and p[-1] > CLUSTER_THRESHOLD
    elif verdict.regime == COEXISTENCE:
        ok = plateau and p[-1] < PLATEAU_CEILING
    else:
        ok = None
    return {
        "horizons": [float(h) for h in est.horizons],
        "prob": [float(x) for x in p],
        "stderr": [float(x) for x in se],
        "increasing": increasing,
        "plateau": plateau,
        "consistent": ok,
        "thresholds": {"cluster": CLUSTER_THRESHOLD, "plateau_ceiling": PLATEAU_CEILING,
                       "note": "library choices, not theoretical constants"},
    }
