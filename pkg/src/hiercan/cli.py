"""Command-line front end: ``hiercan <command> --config run.toml``.

Every command writes ``<out>/<command>.json`` (and CSV tables with
``--format csv``), each embedding the resolved config and its hash, and
echoes the JSON summary to stdout.  Exit status: 0 success, 2 invalid
config, 1 runtime failure; errors are reported as JSON on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import chain, coalescent, dichotomy, forward, renorm, walkcalc
from .config import ConfigError, RunConfig, load
from .environment import validate
from .hiergroup import HierAddress

COMMANDS = ("classify", "recursion", "coalescent", "hazard", "forward", "mkv", "delta", "report")


def clean(obj):
    """JSON-safe copy: numpy to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def _table(header, rows, cfg_hash) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands: each returns (summary dict, {name: (header, rows)})


def cmd_classify(cfg: RunConfig, workers):
    params, law, N = cfg.params, cfg.env.law, cfg.model["N"]
    fin = dichotomy.classify_finite_N(params, N)
    lim = dichotomy.classify_limit(params)
    reg = dichotomy.regularity_check(params)
    sc = renorm.classify_family(params, law)
    cc = chain.cluster_class(sc)
    return {"dichotomy": {"regime": fin.regime, "finite_N": fin.to_dict(), "limit": lim.to_dict(),
                          "regularity": reg.to_dict()},
            "scaling": sc.to_dict(), "cluster": cc.to_dict()}, {}


def cmd_recursion(cfg: RunConfig, workers):
    tr = renorm.recurse(cfg.params, cfg.env.law, cfg.model["d0"], cfg.run["kmax"])
    t = tr.table()
    header = list(t)
    rows = list(zip(*[np.asarray(t[h]) for h in header]))
    summary = {"kmax": tr.kmax, "d_last": float(tr.d[-1]), "sigma_d_last": float(tr.sigma_d[-1])}
    return summary, {"trace": (header, rows)}


def _origin_starts(n, N):
    return [HierAddress.zero(N)] * n


def cmd_coalescent(cfg: RunConfig, workers):
    N, run = cfg.model["N"], cfg.run
    st = coalescent.simulate(run["n"], _origin_starts(run["n"], N), cfg.env, N, run["level_cut"], run["horizon"],
                             run["seed"], d0=cfg.model["d0"])
    out = {"trajectory": st.to_dict()}
    if run["replicas"] > 0:
        est = coalescent.pair_coalescence_estimate(cfg.env, N, run["level_cut"], run["horizons"], run["replicas"],
                                                   run["seed"], d0=cfg.model["d0"], workers=workers)
        out["pair"] = est.to_dict()
    rows = [(repr(t), k, a, ";".join(map(str, m))) for t, k, a, m in st.event_log]
    return out, {"events": (["time", "kind", "address", "merged"], rows)}


def cmd_hazard(cfg: RunConfig, workers):
    N, run, K = cfg.model["N"], cfg.run, cfg.run["level_cut"]
    params, law = cfg.params, cfg.env.law
    prof = walkcalc.profile(params, N, level_cut=K, rho_mean=law.mean)
    lam = params.lam(np.arange(K + 1))
    analytic = [walkcalc.mean_hazard_horizon(prof, lam, h, cfg.model["d0"], law.mean) for h in run["horizons"]]
    est = coalescent.pair_coalescence_estimate(cfg.env, N, K, run["horizons"], run["replicas"], run["seed"],
                                               d0=cfg.model["d0"], workers=workers, annealed=True)
    z = (est.hazard_mean - analytic) / np.where(est.hazard_stderr > 0, est.hazard_stderr, np.inf)
    rows = list(zip(est.horizons, analytic, est.hazard_mean, est.hazard_stderr, z))
    mh = walkcalc.mean_hazard(params, N, K)
    summary = {"level_cut": K, "within_3se": bool(np.all(np.abs(z) < 3)), "series": mh.to_dict(),
               "note": ("MC averages over environment replicas; the analytic column uses the mean "
                        "environment and is exact only for a degenerate law"),
               "table": [dict(zip(("horizon", "analytic", "mc_mean", "mc_stderr", "z"), r)) for r in rows]}
    return summary, {"hazard": (["horizon", "analytic", "mc_mean", "mc_stderr", "z"], rows)}


def cmd_forward(cfg: RunConfig, workers):
    m, run = cfg.model, cfg.run
    fc = forward.ForwardConfig(m["N"], m["K"], m["M"], m["theta"], cfg.env, d0=m["d0"], horizon=run["horizon"],
                               record_every=run["record_every"], seed=run["seed"], immigration=m["immigration"],
                               burn=run["burn"], obs_level=min(run["obs_level"], m["K"]))
    tr = forward.simulate_forward(fc)
    g = tr.global_average()
    k = fc.obs_level
    rows = []
    for i, t in enumerate(tr.times):
        st = tr.state(i)
        for b in range(m["N"] ** (m["K"] - k)):
            eta = HierAddress.from_index(b * m["N"] ** k, m["N"])
            rows.append([float(t), f"{eta}@{k}"] + [float(x) for x in forward.block_average(st, eta, k)])
    header = ["time", "block"] + [f"type{a}" for a in range(fc.q)]
    return {"events": tr.events, "global_average_final": g[-1], "global_average_initial": g[0],
            "records": len(tr)}, {"trajectory": (header, rows)}


def cmd_mkv(cfg: RunConfig, workers):
    run = cfg.run
    r = forward.mkv_particle(run["c"], run["d"], run["atoms"], cfg.model["theta"], run["n_particles"],
                             run["horizon"], run["seed"], burn=run["burn"] or None,
                             record_every=run["record_every"])
    return r.to_dict(), {"path": (["time", "frequency"], list(zip(r.times, r.path)))}


def cmd_delta(cfg: RunConfig, workers):
    sc = renorm.classify_family(cfg.params, cfg.env.law)
    rows = []
    for a1, a2 in cfg.run["alpha"]:
        for j in cfg.run["j"]:
            d = chain.delta_limit(cfg.params, sc, a1, a2, j)
            rows.append((a1, a2, j, d.delta, d.limit, d.gap))
    header = ["alpha1", "alpha2", "j", "delta", "limit", "gap"]
    return {"case": sc.case, "cluster": chain.cluster_class(sc).to_dict(),
            "table": [dict(zip(header, r)) for r in rows]}, {"delta": (header, rows)}


def cmd_report(cfg: RunConfig, workers):
    summary, _ = cmd_classify(cfg, workers)
    N = cfg.model["N"]
    summary["environment"] = validate(cfg.env.spec, N).to_dict()
    try:
        prof = walkcalc.profile(cfg.params, N, rho_mean=cfg.env.law.mean)
        summary["walk"] = {"jmax": prof.jmax, "h1": float(prof.h[1]), "D": prof.D, "tail_bound": prof.tail_bound,
                           "green_00": walkcalc.green_pair(prof, 0, 0).value}
    except (ValueError, IndexError) as exc:
        summary["walk"] = {"error": str(exc)}
    summary["mean_hazard"] = walkcalc.mean_hazard(cfg.params, N, cfg.run["level_cut"]).to_dict()
    return summary, {}


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


# ---------------------------------------------------------------------------


def run(command: str, cfg: RunConfig, out_dir: Path, fmt: str, workers) -> dict:
    summary, tables = HANDLERS[command](cfg, workers)
    h = cfg.hash
    doc = {"command": command, "config_hash": h, "config": cfg.resolved, "result": summary}
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        for name, (header, rows) in tables.items():
            (out_dir / f"{command}_{name}.csv").write_text(_table(header, rows, h))
    else:
        doc["tables"] = {name: {"header": header, "rows": rows} for name, (header, rows) in tables.items()}
    text = json.dumps(clean(doc), sort_keys=True, indent=2) + "\n"
    (out_dir / f"{command}.json").write_text(text)
    return clean(doc)


def _fail(code: int, kind: str, message: str, key=None) -> int:
    err = {"error": kind, "message": message}
    if key is not None:
        err["key"] = key
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hiercan", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML (or .json) run configuration")
    ap.add_argument("--seed", type=int, help="override run.seed")
    ap.add_argument("--workers", type=int, help="worker processes (default: $HIERCAN_WORKERS or 1)")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--format", choices=("csv", "json"), help="table format (overrides output.format)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed", "must be an unsigned 64-bit integer")
            cfg.resolved["run"]["seed"] = args.seed
        report = validate(cfg.env.spec, cfg.model["N"])
        if not report.ok:
            raise ConfigError("environment", "; ".join(report.messages))
    except ConfigError as exc:
        return _fail(2, "config", exc.message, exc.key)
    out_dir = Path(args.out or cfg.output["dir"])
    fmt = args.format or cfg.output["format"]
    try:
        doc = run(args.command, cfg, out_dir, fmt, args.workers)
    except ConfigError as exc:
        return _fail(2, "config", exc.message, exc.key)
    except Exception as exc:  # runtime failures are reported, not raised
        return _fail(1, "runtime", f"{type(exc).__name__}: {exc}")
    print(json.dumps(doc["result"], sort_keys=True, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
