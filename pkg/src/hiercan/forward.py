"""Individual-based forward simulation.

Two models, both with a finite type space ``{0, ..., q-1}``:

* the hierarchical Cannings model on ``B_K(0)`` with ``M`` individuals per
  colony (:func:`simulate_forward`), and
* the single-site McKean-Vlasov particle system (:func:`mkv_particle`),
  whose equilibrium variance of a type frequency is
  ``(lambda + 2d) / (2c + lambda + 2d) * theta(1-theta)`` as ``n -> inf``.

Colony sizes are kept fixed: migration swaps two individuals and a block
reshuffle permutes the block's slots.  Rates at level ``k``:

* every individual initiates a swap with a uniform individual of its
  ``k``-block at rate ``c_{k-1} / (2 N^(k-1))`` (so each individual moves at
  rate ``c_{k-1}/N^(k-1)``);
* each ``k``-block ``xi`` fires at rate ``N^-k lambda_k rho^xi sum_i w_i/r_i^2``:
  reshuffle, pick atom ``i`` with probability proportional to
  ``w_i/r_i^2`` and a type ``a`` from a uniform individual, then replace
  every individual by ``a`` with probability ``r_i``;
* inside a colony every ordered pair resamples at rate ``d0``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .environment import Environment, derive_seed
from .hiergroup import HierAddress


@dataclass
class ForwardConfig:
    N: int
    K: int
    M: int
    theta: Sequence[float]
    env: Environment
    d0: float = 0.0
    horizon: float = 10.0
    record_every: float = 1.0
    seed: int = 0
    immigration: float = 0.0
    burn: float = 0.0
    obs_level: int = 0

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        if th.ndim != 1 or len(th) < 2:
            raise ValueError("theta must be a probability vector on q >= 2 types")
        if np.any(th < 0) or not math.isclose(th.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("theta must be a probability vector")
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.N < 2 or self.K < 0:
            raise ValueError("need N >= 2 and K >= 0")
        if not 0 <= self.obs_level <= self.K:
            raise ValueError("obs_level must lie in [0, K]")
        if self.horizon < 0 or self.record_every <= 0:
            raise ValueError("need horizon >= 0 and record_every > 0")
        if self.d0 < 0 or self.immigration < 0:
            raise ValueError("rates must be non-negative")
        self.theta = tuple(float(x) for x in th)

    @property
    def q(self) -> int:
        return len(self.theta)

    @property
    def colonies(self) -> int:
        return self.N ** self.K


@dataclass
class ForwardState:
    counts: np.ndarray  # (colonies, q)
    time: float
    N: int
    K: int

    @property
    def M(self) -> int:
        return int(self.counts[0].sum())


@dataclass
class ForwardTrajectory:
    times: np.ndarray
    counts: np.ndarray  # (records, colonies, q)
    cfg: ForwardConfig
    qv: float = 0.0
    het_integral: float = 0.0
    events: int = 0

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> ForwardState:
        return ForwardState(self.counts[i], float(self.times[i]), self.cfg.N, self.cfg.K)

    def global_average(self) -> np.ndarray:
        tot = self.counts.sum(axis=1)
        return tot / tot.sum(axis=1, keepdims=True)

    def to_csv(self, k: int = 0) -> str:
        """Downsampled table: time, block address, type frequencies."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "block"] + [f"type{a}" for a in range(self.cfg.q)])
        N, K = self.cfg.N, self.cfg.K
        for i, t in enumerate(self.times):
            st = self.state(i)
            for b in range(N ** (K - k)):
                eta = HierAddress.from_index(b * N ** k, N)
                freqs = block_average(st, eta, k)
                w.writerow([repr(float(t)), f"{eta}@{k}"] + [repr(float(f)) for f in freqs])
        return buf.getvalue()


def block_average(state: ForwardState, eta: HierAddress, k: int) -> np.ndarray:
    """Empirical type distribution over ``B_k(eta)``."""
    if not 0 <= k <= state.K:
        raise ValueError(f"block height {k} outside [0, {state.K}]")
    N = state.N
    start = eta.to_index(state.K) // N ** k * N ** k
    tot = state.counts[start:start + N ** k].sum(axis=0)
    return tot / tot.sum()


def _block_tables(cfg: ForwardConfig):
    env, N, K = cfg.env, cfg.N, cfg.K
    lam = np.asarray(env.params.lam(np.arange(K + 1)), dtype=float)
    r = env.shape.r
    star = env.shape.w / r ** 2
    rates, cums, off = [], [], [0]
    for k in range(K + 1):
        rho = env.level_table(k, K, N)
        tot = rho.sum()
        rates.append(lam[k] * tot * star.sum() / N ** k)
        cum = np.cumsum(rho) / tot if tot > 0 else np.linspace(1.0 / len(rho), 1.0, len(rho))
        cum[-1] = 1.0
        cums.append(cum)
        off.append(off[-1] + len(rho))
    atom_cum = np.cumsum(star) / star.sum()
    return np.array(rates), np.concatenate(cums), np.array(off, dtype=np.int64), r.astype(float), atom_cum


def initial_types(cfg: ForwardConfig) -> np.ndarray:
    """Every individual an independent theta-draw."""
    rng = np.random.default_rng(derive_seed(cfg.seed, 1))
    return rng.choice(cfg.q, size=(cfg.colonies, cfg.M), p=np.asarray(cfg.theta)).astype(np.int64)


def simulate_forward(cfg: ForwardConfig, types: Optional[np.ndarray] = None) -> ForwardTrajectory:
    from ._kernels import forward_run

    N, K = cfg.N, cfg.K
    if types is None:
        types = initial_types(cfg)
    types = np.array(types, dtype=np.int64)
    if types.shape != (cfg.colonies, cfg.M):
        raise ValueError(f"initial types must have shape {(cfg.colonies, cfg.M)}")
    c = np.asarray(cfg.env.params.c(np.arange(max(K, 1))), dtype=float)[:K]
    mig = np.array([c[j - 1] / (2.0 * N ** (j - 1)) for j in range(1, K + 1)])
    rates, cums, off, atom_r, atom_cum = _block_tables(cfg)
    theta_cum = np.cumsum(cfg.theta)
    theta_cum[-1] = 1.0
    n_rec = int(math.floor(cfg.horizon / cfg.record_every + 1e-9)) + 1
    rec_times = np.arange(n_rec) * cfg.record_every
    if rec_times[-1] < cfg.horizon:
        rec_times = np.append(rec_times, cfg.horizon)
    seed = derive_seed(cfg.seed, 2) & 0xFFFFFFFF
    rec, qv, het, nev = forward_run(types, N, K, cfg.q, mig, cfg.immigration, theta_cum, cfg.d0, rates, cums,
                                    off, atom_r, atom_cum, rec_times, cfg.obs_level, cfg.burn, seed)
    return ForwardTrajectory(rec_times, rec, cfg, qv, het, int(nev))


# ---------------------------------------------------------------------------
# McKean-Vlasov particles


@dataclass
class MKVResult:
    mean: float
    variance: float
    se_mean: float
    se_variance: float
    predicted_variance: float
    finite_n_variance: float
    times: np.ndarray
    path: np.ndarray
    n: int

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in self.__dict__.items() if k not in ("times", "path")}


def mkv_variance(c: float, d: float, atoms, theta1: float, n: Optional[int] = None) -> float:
    """Equilibrium variance of the type-0 frequency (``n=None``: the limit)."""
    sigma2 = theta1 * (1 - theta1)
    lam = sum(w for _, w in atoms)
    if n is None:
        return (lam + 2 * d) / (2 * c + lam + 2 * d) * sigma2
    B = 2 * d + sum(w * (1 + 2 * (1 - r) / (r * n)) for r, w in atoms)
    return (B + 2 * c / n) * sigma2 / (2 * c + B)


def mkv_particle(c: float, d: float, atoms, theta: Sequence[float], n_particles: int, horizon: float,
                 seed: int, burn: Optional[float] = None, nbatch: int = 50, record_every: float = 1.0) -> MKVResult:
    """Run the particle system and report equilibrium moments of the
    type-0 frequency with batch-means standard errors."""
    from ._kernels import mkv_run

    theta = np.asarray(theta, dtype=float)
    if n_particles < 2:
        raise ValueError("need at least two particles")
    atoms = [(float(r), float(w)) for r, w in atoms]
    if any(not 0 < r <= 1 or w < 0 for r, w in atoms):
        raise ValueError("atoms need r in (0, 1] and w >= 0")
    if burn is None:
        burn = 0.1 * horizon
    rng = np.random.default_rng(derive_seed(seed, 1))
    counts = np.bincount(rng.choice(len(theta), n_particles, p=theta), minlength=len(theta)).astype(np.int64)
    theta_cum = np.cumsum(theta)
    theta_cum[-1] = 1.0
    atom_r = np.array([r for r, _ in atoms] or [1.0])
    atom_rate = np.array([w / r ** 2 for r, w in atoms] or [0.0])
    bw, bx, bxx, path = mkv_run(counts, float(c), float(d), theta_cum, atom_r, atom_rate, float(horizon),
                                float(burn), nbatch, float(record_every), derive_seed(seed, 2) & 0xFFFFFFFF)
    W = bw.sum()
    mean = bx.sum() / W
    var = bxx.sum() / W - mean ** 2
    ok = bw > 0
    bm = bx[ok] / bw[ok]
    bv = bxx[ok] / bw[ok] - mean ** 2
    nb = ok.sum()
    se_m = bm.std(ddof=1) / math.sqrt(nb)
    se_v = bv.std(ddof=1) / math.sqrt(nb)
    return MKVResult(float(mean), float(var), float(se_m), float(se_v),
                     mkv_variance(c, d, atoms, theta[0]), mkv_variance(c, d, atoms, theta[0], n_particles),
                     np.arange(len(path)) * record_every, path, n_particles)


# ---------------------------------------------------------------------------
# two-level check


@dataclass
class BlockscaleReport:
    N: list
    estimate: list
    predicted_limit: float
    predicted_finite: list
    gaps: list
    monotone: bool
    martingale_mean: float
    martingale_se: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def blockscale_prediction(c0: float, d0: float, mu0: float = 0.0, N: Optional[int] = None) -> float:
    """Predicted volatility of the 1-block average on time scale ``N t``.

    ``N=None`` gives the mean-field value ``c0 (mu0 + d0) / (c0 + mu0 + d0)``;
    finite ``N`` keeps the self-interaction of a colony with its own block,
    ``c0 (mu0 + d0) / (c0 + (1 - 1/N)(mu0 + d0))``.
    """
    s = mu0 + d0
    if N is None:
        return c0 * s / (c0 + s)
    return c0 * s / (c0 + (1.0 - 1.0 / N) * s)


def blockscale_check(env: Environment, Ns=(5, 10, 20), M: int = 50, d0: float = 0.5, macro_horizon: float = 20.0,
                     macro_burn: float = 2.0, seed: int = 0, theta=(0.5, 0.5)) -> BlockscaleReport:
    """Volatility of 1-block averages in a two-level system over an ``N`` sweep.

    The estimate is the realized quadratic variation of the 1-block type
    frequencies divided by ``2 int sum_b Y_b (1-Y_b) ds`` on macro time
    ``s = t/N``; it is compared with :func:`blockscale_prediction`.
    """
    c0 = float(env.params.c(0))
    mu0 = float(env.params.mu(0)) * env.law.mean
    est, fin, incs = [], [], []
    for N in Ns:
        cfg = ForwardConfig(N, 2, M, theta, env, d0=d0, horizon=macro_horizon * N, record_every=N,
                            seed=derive_seed(seed, N), burn=macro_burn * N, obs_level=1)
        tr = simulate_forward(cfg)
        est.append(float(tr.qv / (2.0 * tr.het_integral / N)))
        fin.append(blockscale_prediction(c0, d0, mu0, N))
        g = tr.global_average()[:, 0]
        incs.append(np.diff(g))
    lim = blockscale_prediction(c0, d0, mu0)
    gaps = [e - lim for e in est]
    allinc = np.concatenate(incs)
    return BlockscaleReport(list(Ns), est, lim, fin, gaps, bool(np.all(np.diff(np.abs(gaps)) < 0)),
                            float(allinc.mean()), float(allinc.std(ddof=1) / math.sqrt(len(allinc))))
