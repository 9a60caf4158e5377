"""The dual spatial Lambda-coalescent in a quenched environment.

Lineages live on the leaves of ``B_K(0)`` (``K`` is the level cut: no
block above height ``K`` carries events).  A partition element at ``eta``
jumps to a uniform point of its ``j``-block at rate

    q_j(eta) = N^-(j-1) * (c_{j-1} + lambda^{MC_j(eta)} / N),

the second term being the share of migration produced by reshuffling.
In the height-``k`` block ``xi`` holding ``b`` elements, a given set of
``l >= 2`` of them merges at rate ``N^-k lambda^xi_{b,l}``; after a merger
every element of the block is reshuffled uniformly over it.  Pairs sitting
at the same leaf also merge at the Kingman rate ``2 d0``.

Two entry points: :func:`simulate` is an exact event-driven trajectory for
a handful of lineages, with event log and per-pair hazards;
:func:`pair_coalescence_estimate` is a compiled many-replica engine for
the tagged pair started at the origin.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .environment import Environment, hash_vertices
from .hiergroup import HierAddress, TreeAddress

CHUNK = 1000  # replicas per RNG stream; fixed so results ignore worker count


def _atoms(shape):
    atoms = getattr(shape, "atoms", shape)
    return [(float(r), float(w)) for r, w in atoms]


def coalescence_rate(b: int, l: int, shape) -> float:
    """``lambda_{b,l} = sum_i w_i r_i^l (1-r_i)^(b-l) / r_i^2``: the rate at
    which a given ``l`` of ``b`` lineages merge."""
    if not 2 <= l <= b:
        raise ValueError(f"need 2 <= l <= b, got b={b}, l={l}")
    return float(sum(w * r ** (l - 2) * (1.0 - r) ** (b - l) for r, w in _atoms(shape)))


def effective_migration(env: Environment, eta: HierAddress, k: int, N: int) -> float:
    """``c_k + lambda^{MC_{k+1}(eta)} / N``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    xi = TreeAddress(eta, k + 1)
    return float(env.params.c(k)) + env.lambda_at(xi) / N


def rate_tail(params, N: int, level_cut: int, extra: int = 60) -> dict:
    """Rates switched off by the level cut, relative to the active ones.

    Geometric estimate from the next ``extra`` levels (fewer for explicit
    data); ``nan`` when no levels beyond the cut are known.
    """
    top = level_cut + extra
    if params.length is not None:
        top = min(top, params.length - 2)
    k = np.arange(top + 1, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        cbar = params.c(k[:-1].astype(int)) + params.lam(k[1:].astype(int)) / N
        q = cbar / float(N) ** k[:-1]
        haz = params.lam(k.astype(int)) / float(N) ** k
    act_q, act_h = q[:level_cut].sum(), haz[: level_cut + 1].sum()
    if top <= level_cut:
        return {"migration": math.nan, "hazard": math.nan}
    return {"migration": float(q[level_cut:].sum() / act_q) if act_q > 0 else 0.0,
            "hazard": float(haz[level_cut + 1:].sum() / act_h) if act_h > 0 else 0.0}


def default_level_cut(params, N: int, tol: float = 1e-8, max_cut: int = 40) -> int:
    """Smallest cut whose neglected rates are below ``tol`` of the active ones."""
    for K in range(1, max_cut + 1):
        t = rate_tail(params, N, K)
        if max(t["migration"], t["hazard"]) < tol:
            return K
    return max_cut


# ---------------------------------------------------------------------------
# exact trajectories


@dataclass
class LabelledPartition:
    """Disjoint member sets covering ``{1..n}``, each with a leaf location."""

    blocks: list
    N: int

    def __post_init__(self):
        seen = set()
        for members, loc in self.blocks:
            if seen & members:
                raise ValueError("partition blocks must be disjoint")
            seen |= members
            if loc.N != self.N:
                raise ValueError("location order does not match N")
        if seen != set(range(1, len(seen) + 1)):
            raise ValueError("partition must cover 1..n")

    def __len__(self) -> int:
        return len(self.blocks)

    def sizes(self) -> list:
        return sorted((len(m) for m, _ in self.blocks), reverse=True)

    def to_dict(self) -> dict:
        return {"N": self.N, "blocks": [{"members": sorted(m), "location": str(loc)}
                                        for m, loc in sorted(self.blocks, key=lambda b: min(b[0]))]}


@dataclass
class CoalescentState:
    partition: LabelledPartition
    clock: float
    hazard: dict
    event_log: list = field(default_factory=list)

    def merged(self, i: int, j: int) -> bool:
        return any(i in m and j in m for m, _ in self.partition.blocks)

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "kind", "address", "merged"])
        for t, kind, addr, merged in self.event_log:
            w.writerow([repr(t), kind, addr, ";".join(str(x) for x in merged)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"clock": self.clock, "partition": self.partition.to_dict(),
                "hazard": {f"{i},{j}": v for (i, j), v in sorted(self.hazard.items())},
                "events": len(self.event_log)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class _Sim:
    def __init__(self, env, N, K, d0, rng):
        self.env, self.N, self.K, self.d0, self.rng = env, N, K, d0, rng
        self.c = np.asarray(env.params.c(np.arange(max(K, 1))), dtype=float)
        self.lam = np.asarray(env.params.lam(np.arange(K + 1)), dtype=float)
        self.shape = _atoms(env.shape)
        self._rho = {}

    def rho(self, k, idx):
        key = (k, idx // self.N ** k)
        val = self._rho.get(key)
        if val is None:
            val = self._rho[key] = self.env.rho_at(TreeAddress(HierAddress.from_index(idx, self.N), k))
        return val

    def q(self, j, idx):
        return (self.c[j - 1] + self.lam[j] * self.rho(j, idx) / self.N) / self.N ** (j - 1)

    def distance(self, x, y):
        d = 0
        while x // self.N ** d != y // self.N ** d:
            d += 1
        return d

    def pair_rate(self, x, y):
        d = self.distance(x, y)
        rate = 2.0 * self.d0 if d == 0 else 0.0
        return rate + sum(self.lam[k] * self.rho(k, x) / self.N ** k for k in range(d, self.K + 1))

    def clocks(self, elems):
        """All (rate, kind, payload) clocks of the current configuration."""
        out = []
        for e, (_, loc) in enumerate(elems):
            for j in range(1, self.K + 1):
                out.append((self.q(j, loc), "migration", (e, j)))
        for e, f in itertools.combinations(range(len(elems)), 2):
            if elems[e][1] == elems[f][1] and self.d0 > 0:
                out.append((2.0 * self.d0, "kingman", (e, f)))
        for k in range(self.K + 1):
            groups = {}
            for e, (_, loc) in enumerate(elems):
                groups.setdefault(loc // self.N ** k, []).append(e)
            for top, members in sorted(groups.items()):
                b = len(members)
                if b < 2:
                    continue
                mass = self.lam[k] * self.rho(k, elems[members[0]][1]) / self.N ** k
                for i, (r, w) in enumerate(self.shape):
                    p2 = 1.0 - (1.0 - r) ** b - b * r * (1.0 - r) ** (b - 1)
                    rate = mass * w / r ** 2 * p2
                    if rate > 0:
                        out.append((rate, "block", (k, top, i, tuple(members))))
        return out


def simulate(n: int, start: Sequence[HierAddress], env: Environment, N: int, level_cut: int,
             horizon: float, seed: int, d0: float = 0.0, log: bool = True) -> CoalescentState:
    """Event-driven trajectory of ``n`` lineages up to ``horizon``.

    Clocks live in a priority queue ordered by (time, insertion counter);
    whenever the configuration changes all clocks are redrawn, which is
    exact by memorylessness.
    """
    if n < 1 or len(start) != n:
        raise ValueError("need n >= 1 starting locations")
    if level_cut < 0:
        raise ValueError("level_cut must be >= 0")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    K = level_cut
    rng = np.random.default_rng(seed)
    sim = _Sim(env, N, K, d0, rng)
    elems = [(frozenset([i + 1]), a.to_index(K)) for i, a in enumerate(start)]
    hazard = {(i, j): 0.0 for i in range(1, n + 1) for j in range(i + 1, n + 1)}
    events = []
    t, counter = 0.0, itertools.count()
    while True:
        queue = []
        for rate, kind, payload in sim.clocks(elems):
            heapq.heappush(queue, (t + rng.exponential(1.0 / rate), next(counter), kind, payload))
        t_next = queue[0][0] if queue else math.inf
        t_stop = min(t_next, horizon)
        # accumulate pair hazards over the holding interval
        owner = {i: e for e, (m, _) in enumerate(elems) for i in m}
        for (i, j) in hazard:
            if owner[i] != owner[j]:
                hazard[(i, j)] += sim.pair_rate(elems[owner[i]][1], elems[owner[j]][1]) * (t_stop - t)
        if t_next > horizon:
            t = horizon
            break
        t, _, kind, payload = heapq.heappop(queue)
        if kind == "migration":
            e, j = payload
            members, loc = elems[e]
            block = N ** j
            new = loc // block * block + int(rng.integers(block))
            elems[e] = (members, new)
            if log:
                events.append((t, "migration", str(HierAddress.from_index(new, N)), sorted(members)))
        elif kind == "kingman":
            e, f = payload
            merged = elems[e][0] | elems[f][0]
            loc = elems[e][1]
            elems = [x for g, x in enumerate(elems) if g not in (e, f)] + [(merged, loc)]
            if log:
                events.append((t, "kingman", str(HierAddress.from_index(loc, N)), sorted(merged)))
        else:
            k, top, i, members = payload
            r = sim.shape[i][0]
            while True:
                part = [e for e in members if rng.random() < r]
                if len(part) >= 2:
                    break
            merged = frozenset().union(*(elems[e][0] for e in part))
            rest = [elems[e][0] for e in members if e not in part] + [merged]
            others = [x for g, x in enumerate(elems) if g not in members]
            block = N ** k
            moved = [(m, top * block + int(rng.integers(block))) for m in rest]
            elems = others + moved
            if log:
                xi = TreeAddress(HierAddress.from_index(top * block, N), k)
                events.append((t, "block", str(xi), sorted(merged)))
    elems.sort(key=lambda b: min(b[0]))
    part = LabelledPartition([(m, HierAddress.from_index(loc, N)) for m, loc in elems], N)
    return CoalescentState(part, t, hazard, events)


# ---------------------------------------------------------------------------
# many-replica pair engine


@dataclass
class PairEstimate:
    horizons: np.ndarray
    prob: np.ndarray
    stderr: np.ndarray
    hazard_mean: np.ndarray
    hazard_var: np.ndarray
    replicas: int
    level_cut: int
    tail: dict
    annealed: bool = False

    @property
    def hazard_stderr(self) -> np.ndarray:
        return np.sqrt(self.hazard_var / self.replicas)

    def to_dict(self) -> dict:
        return {"horizons": self.horizons.tolist(), "prob": self.prob.tolist(), "stderr": self.stderr.tolist(),
                "hazard_mean": self.hazard_mean.tolist(), "hazard_var": self.hazard_var.tolist(),
                "hazard_stderr": self.hazard_stderr.tolist(), "replicas": self.replicas,
                "level_cut": self.level_cut, "tail": self.tail, "annealed": self.annealed}


def _chunk_seed(seed: int, chunk: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(chunk)]).generate_state(1, np.uint32)[0])


def _run_chunk(args):
    from ._kernels import pair_chunk

    return pair_chunk(*args)


def resolve_workers(workers: Optional[int]) -> int:
    if workers is None:
        workers = int(os.environ.get("HIERCAN_WORKERS", "1"))
    return max(1, int(workers))


def pair_coalescence_estimate(env: Environment, N: int, level_cut: Optional[int], horizons, replicas: int,
                              seed: int, d0: float = 0.0, workers: Optional[int] = None,
                              annealed: bool = False) -> PairEstimate:
    """Coalescence probability of two lineages started at the origin by
    each horizon, plus mean and variance of the accumulated pair hazard.

    Replicas are split into fixed chunks of ``CHUNK`` with RNG streams
    derived from ``(seed, chunk index)``, so the output does not depend on
    ``workers``.  With ``annealed=True`` every replica reads its own
    environment realization (seed derived from the master seed and the
    replica index); otherwise all replicas share the quenched field.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    horizons = np.sort(np.asarray(horizons, dtype=float))
    if horizons.size == 0 or horizons[0] < 0:
        raise ValueError("need non-negative horizons")
    params = env.params
    K = default_level_cut(params, N) if level_cut is None else int(level_cut)
    if K < 0:
        raise ValueError("level_cut must be >= 0")
    if N ** K > 2 ** 62:
        raise ValueError("level cut too large for integer leaf labels")
    c = np.asarray(params.c(np.arange(max(K, 1))), dtype=float)
    lam = np.asarray(params.lam(np.arange(K + 1)), dtype=float)
    law = env.law
    keep = law.w > 0
    values = law.v[keep].astype(float)
    cum = np.cumsum(law.w[keep])
    cum[-1] = 1.0
    master = int(env.master_seed) & (2 ** 64 - 1)
    if annealed:
        env_seeds = hash_vertices(master ^ 0x5EED5EED5EED5EED, np.zeros(replicas, np.int64),
                                  np.arange(1, replicas + 1, dtype=np.int64).reshape(-1, 1))
    else:
        env_seeds = np.full(replicas, master, dtype=np.uint64)
    jobs = []
    for ch in range(math.ceil(replicas / CHUNK)):
        lo = ch * CHUNK
        nrep = min(CHUNK, replicas - lo)
        jobs.append((_chunk_seed(seed, ch), nrep, int(N), K, c, lam, float(d0),
                     env_seeds[lo:lo + nrep], values, cum, horizons))
    workers = resolve_workers(workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]
    coal = np.concatenate([r[0] for r in results])
    haz = np.concatenate([r[1] for r in results])
    p = coal.mean(axis=0)
    se = np.sqrt(p * (1 - p) / replicas)
    hv = haz.var(axis=0, ddof=1) if replicas > 1 else np.zeros(len(horizons))
    return PairEstimate(horizons, p, se, haz.mean(axis=0), hv, replicas, K, rate_tail(params, N, K), annealed)
