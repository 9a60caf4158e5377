"""Closed-form quantities of the homogeneous hierarchical random walk.

A walker on the hierarchical group with effective migration sequence
``cbar_k = c_k + lambda_{k+1}/N`` jumps, at rate ``q_j = cbar_{j-1}/N^(j-1)``,
to a uniform point of its ``j``-block.  On functions of the distance to
the origin the semigroup is diagonalized by the differences of normalized
block indicators, with eigenvalues

    h_j = sum_{i >= j} q_i,

which gives the transition kernel, its Green functions and the mean
coalescence hazard of two walkers as finite sums of exponentials.  All
infinite sums are truncated at ``jmax`` with an a-posteriori bound on the
neglected tail; a profile built with a ``level_cut`` is exact (rates above
the cut are zero).

The normalized weights ``r_j`` and their normalizer ``D`` follow the
usual Fourier-side parametrization; note that the eigenvalues in real time
are ``h_j = D * (N/(N-1) * r_j + sum_{i>j} r_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hiergroup import shell_size


@dataclass(frozen=True)
class WalkProfile:
    """Effective rates of the homogeneous walk, indexed by level.

    ``q[j]`` (``j = 1..jmax``) is the jump rate at level ``j``, ``h[j]``
    the eigenvalue (``h[jmax+1] = 0``), ``r[j]`` the normalized weights;
    index 0 of ``q``, ``h`` and ``r`` is unused and zero.
    """

    N: int
    jmax: int
    cbar: np.ndarray
    q: np.ndarray
    h: np.ndarray
    r: np.ndarray
    D: float
    tail_bound: float
    level_cut: Optional[int] = None

    @property
    def truncated(self) -> bool:
        return self.level_cut is not None

    def h_fourier(self) -> np.ndarray:
        """``(N-1)/N r_j + sum_{i>j} r_i``: the eigenvalues in units of ``D``
        as the Fourier-side formula is usually written (differs from
        ``h/D``; see module docstring)."""
        r = self.r
        tail = np.concatenate([np.cumsum(r[::-1])[::-1][1:], [0.0]])
        out = (self.N - 1) / self.N * r + tail
        out[0] = 0.0
        return out


def _tail_estimate(q: np.ndarray, window: int = 8) -> float:
    """Geometric bound on ``sum_{i > len(q)-1} q_i`` from the last ratios."""
    last = q[-window:]
    if np.any(last <= 0):
        return 0.0
    ratio = float(np.max(last[1:] / last[:-1]))
    if ratio >= 1.0:
        return math.inf
    return float(last[-1] * ratio / (1.0 - ratio))


def profile(params, N: int, jmax: Optional[int] = None, tol: float = 1e-10,
            level_cut: Optional[int] = None, rho_mean: float = 1.0, max_levels: int = 4000) -> WalkProfile:
    """Build the walk profile for migration ``cbar_k = c_k + rho_mean*lambda_{k+1}/N``.

    With ``level_cut=K`` rates above level ``K`` are zero and the profile is
    exact.  Otherwise ``jmax`` is increased until both the neglected rate
    and the neglected mass ``N**-jmax`` are below ``tol`` (relative to
    ``h_1``); the estimated tail is reported as ``tail_bound``.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if level_cut is not None:
        if level_cut < 0:
            raise ValueError("level_cut must be >= 0")
        J = level_cut
    elif jmax is not None:
        J = jmax
    else:
        J = max(8, int(math.ceil(-math.log(tol) / math.log(N))) + 2)
    while True:
        k = np.arange(J)
        with np.errstate(over="ignore", invalid="ignore"):
            cbar = params.c(k) + rho_mean * params.lam(k + 1) / N
            q = np.concatenate([[0.0], cbar / float(N) ** k])
        if not np.all(np.isfinite(q)):
            raise ValueError("migration rates overflow: growth condition violated for this N")
        if level_cut is not None:
            tail = 0.0
            break
        tail = _tail_estimate(q[1:]) if J >= 9 else math.inf
        if tail < tol * max(q[1:].sum(), 1e-300) or jmax is not None:
            break
        if J >= max_levels:
            raise ValueError("divergent tail: growth condition violated for this N")
        J *= 2
    h = np.concatenate([np.cumsum(q[::-1])[::-1], [0.0]])
    h[0] = 0.0
    # r_j D = (N-1)/N sum_{i>=j} q_i N^{j-i}, accumulated from the top
    rD = np.zeros(J + 1)
    acc = 0.0
    for j in range(J, 0, -1):
        acc = q[j] + acc / N
        rD[j] = (N - 1) / N * acc
    D = float(rD.sum())
    return WalkProfile(N, J, cbar, q, h, rD / D, D, float(tail), level_cut)


def _coefficients(prof: WalkProfile, k: int):
    """Levels ``m`` and weights ``K_{mk} N^-m`` of the exponential sum."""
    N, J = prof.N, prof.jmax
    m = np.arange(max(k, 1), J + 1)
    w = np.where(m == k, -1.0, N - 1.0) * float(N) ** (-m.astype(float))
    return m, w


def kernel_series(prof: WalkProfile, t, k: int):
    """The exponential series ``sum_{k<=m<=jmax} K_{mk} e^{-h_m t} N^-m``.

    Pointwise this is the kernel up to the truncated top levels; unlike
    :func:`transition_prob` it carries no mass-at-infinity correction and
    is the natural integrand for Green functions.
    """
    t = np.asarray(t, dtype=float)
    if k > prof.jmax:
        return np.zeros_like(t)
    m, w = _coefficients(prof, k)
    return np.exp(-np.multiply.outer(t, prof.h[m])) @ w


def transition_prob(prof: WalkProfile, t, k: int):
    """``p_t(0, eta)`` for any ``eta`` at distance ``k`` from the origin.

    The levels above ``jmax`` are accounted for by the term ``N**-jmax``,
    which is exact for a level-cut profile and keeps the kernel normalized
    to rounding error otherwise.
    """
    if k < 0:
        raise ValueError("distance must be >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be >= 0")
    if k > prof.jmax:
        return np.zeros_like(t)
    return kernel_series(prof, t, k) + float(prof.N) ** (-prof.jmax)


def block_prob(prof: WalkProfile, t, k: int):
    """``P(walk at time t lies in B_k(0))``."""
    t = np.asarray(t, dtype=float)
    N, J = prof.N, prof.jmax
    if k >= J:
        return np.ones_like(t)
    j = np.arange(k, J)
    w = (1.0 - 1.0 / N) * float(N) ** (k - j.astype(float))
    return np.exp(-np.multiply.outer(t, prof.h[j + 1])) @ w + float(N) ** (k - J)


def compose(prof: WalkProfile, ps: np.ndarray, pt: np.ndarray) -> np.ndarray:
    """Convolution of two radial kernels given on distance classes.

    ``ps[m]`` and ``pt[m]`` are the kernel values at distance ``m``;
    returns the radial kernel of the convolution (Chapman-Kolmogorov).
    """
    N = prof.N
    L = len(ps)
    size = np.array([shell_size(m, N) for m in range(L)], dtype=float)
    out = np.zeros(L)
    for k in range(L):
        total = 0.0
        for m in range(L):
            if m != k:
                total += size[m] * ps[m] * pt[max(m, k)]
        if k == 0:
            total += ps[0] * pt[0]
        else:
            inner = sum(size[j] * pt[j] for j in range(k)) + (size[k] - N ** (k - 1)) * pt[k]
            total += ps[k] * inner
        out[k] = total
    return out


@dataclass(frozen=True)
class GreenValue:
    value: float
    finite: bool
    tail_bound: float


def green_pair(prof: WalkProfile, p: int, q: int) -> GreenValue:
    """``int_0^inf p_t(0,eta_p) p_t(0,eta_q) dt`` as the exact double sum."""
    if p < 0 or q < 0:
        raise ValueError("distances must be >= 0")
    if prof.truncated:
        return GreenValue(math.inf, False, 0.0)
    N, h = prof.N, prof.h
    mp, wp = _coefficients(prof, p)
    mq, wq = _coefficients(prof, q)
    S = h[mp][:, None] + h[mq][None, :]
    val = float(wp @ (1.0 / S) @ wq)
    # the diagonal terms N^-2m / (2 h_m) govern convergence of the tail
    m = np.arange(max(p, q, 1), prof.jmax + 1)
    diag = float(N) ** (-2.0 * m) / (2 * h[m])
    est = _tail_estimate(diag) if len(diag) >= 9 else math.inf
    if not np.isfinite(est):
        return GreenValue(math.inf, False, math.inf)
    # omitted rows/columns contribute at most ~ jmax times the diagonal tail
    return GreenValue(val, True, est * (N - 1) ** 2 * prof.jmax)


def green_asymptote(prof: WalkProfile, p: int, q: int) -> float:
    """Large-``N`` approximation ``cbar_0 / ((1 + [p=q]) cbar_{min} N^max)``.

    Exact to leading order on the diagonal.  Off the diagonal it keeps
    only the ``(p+1, q+1)`` term of the double sum, but the ``n = q`` terms
    are of the same order, so only the order of magnitude is right (for
    ``p=0, q=1`` the true limit is ``(1/(2 cbar_0) + 1/(2 cbar_1)) / N``).
    """
    lo, hi = min(p, q), max(p, q)
    return float(prof.cbar[0] / ((1 + (p == q)) * prof.cbar[lo] * prof.N ** hi))


@dataclass(frozen=True)
class MeanHazard:
    value: float
    partial_sums: np.ndarray
    diverges: Optional[bool]
    level_cut: int

    def to_dict(self) -> dict:
        return {"value": self.value, "diverges": self.diverges, "level_cut": self.level_cut,
                "partial_sums_tail": [float(x) for x in self.partial_sums[-5:]]}


def mean_hazard(params, N: int, level_cut: int) -> MeanHazard:
    """Partial sums of ``sum_k (1/cbar_k) sum_{l<=k} lambda_l (1/2 [l=k] + [l<k])``.

    Divergence as the cut grows is decided symbolically for closed-form
    families (``None`` for explicit data).
    """
    from .dichotomy import CLUSTERING, classify_finite_N

    k = np.arange(level_cut + 1)
    cbar = params.c(k) + params.lam(k + 1) / N
    lam = params.lam(k)
    inner = np.cumsum(lam) - 0.5 * lam
    sums = np.cumsum(inner / cbar)
    diverges = None
    if params.kind != "explicit":
        diverges = classify_finite_N(params, N).regime == CLUSTERING
    return MeanHazard(float(sums[-1]), sums, diverges, level_cut)


def mean_hazard_horizon(prof: WalkProfile, lam: np.ndarray, t: float, d0: float = 0.0,
                        rho_mean: float = 1.0) -> float:
    """Expected hazard accumulated by time ``t`` by two independent walkers
    started at the origin.

    The pair coalesces at rate ``sum_{k >= dist} N^-k lambda_k rho`` plus
    ``2 d0`` when co-located; ``lam[k]`` is given for ``k = 0..K`` (the
    rate is cut above ``K``).  The difference of the walkers is a walk run
    at double speed, so each block probability integrates in closed form.
    """
    N, J = prof.N, prof.jmax
    lam = np.asarray(lam, dtype=float)
    total = 0.0
    for k in range(len(lam)):
        rate = lam[k] * rho_mean + (2.0 * d0 if k == 0 else 0.0)
        if rate == 0.0:
            continue
        if k >= J:
            integral = t
        else:
            j = np.arange(k, J)
            h2 = 2.0 * prof.h[j + 1]
            with np.errstate(divide="ignore", invalid="ignore"):
                part = np.where(h2 > 0, -np.expm1(-h2 * t) / h2, t)
            integral = float(((1.0 - 1.0 / N) * float(N) ** (k - j.astype(float))) @ part)
            integral += float(N) ** (k - J) * t
        total += float(N) ** (-k) * rate * integral
    return total


def transience_degree(c: float, N: int):
    """Degree ``gamma = log c / log(N/c)`` and dimension ``2 log N / log(N/c)``
    for ``c_k = c^k``."""
    if c <= 0 or N < 2:
        raise ValueError("need c > 0 and N >= 2")
    if c >= N:
        raise ValueError("c >= N: migration growth condition broken")
    denom = math.log(N / c)
    return math.log(c) / denom, 2.0 * math.log(N) / denom
