"""Command-line front end.

    treecp COMMAND [--config FILE] [flags]

Values come from the built-in defaults, then the JSON config file, then the
command-line flags. Unknown config keys are rejected. Output is CSV (the
default) or JSON lines; both begin with a header record holding the
resolved configuration, its hash, the root seed and the package version.

Estimate records have the fields op, params, value, ci_lo, ci_hi, n,
censored, seed. Trajectory records (``--trajectories N`` on survive and
growth, JSON lines only) have the fields rep, t, n_infected, n_frontier,
root_infected, w; CMJ trajectories have rep, t, Z.

Exit codes: 0 success, 1 configuration error, 2 degenerate result.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from . import analysis as A
from . import cmj
from . import engine as E
from . import io
from . import oracle
from .parallel import replicate, resolve_threads
from .trees import Fixed, LazyTree, Periodic, parse_topology

COMMANDS = ("survive", "growth", "u", "beta", "weight", "lambda1", "lambda2", "gap",
            "couple", "cmj", "oracle")

DEFAULTS = {
    "topology": "const:2",
    "tree": "twovertex",
    "lambda": [1.0],
    "reps": 1000,
    "max_time": 100.0,
    "mass_cap": 100000,
    "seed": 0,
    "threads": None,
    "output": "-",
    "format": "csv",
    "k": 5,
    "m1": 20.0,
    "rho": None,
    "t0": 20.0,
    "ngrid": [1, 2, 3],
    "R": 20,
    "T": 200.0,
    "radius": None,
    "tol": 0.05,
    "bracket": [0.1, 3.0],
    "threshold": 0.01,
    "epochs": 10,
    "epoch_length": 1.0,
    "t": [0.5, 1.0, 2.0],
    "max_events": 10000,
    "horizon": 20.0,
    "trajectories": 0,
}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def build_parser():
    p = _Parser(prog="treecp", description="Contact process on trees.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", default=None, help="JSON file with default values")
    S = argparse.SUPPRESS
    add = p.add_argument
    add("--topology", default=S, help="e.g. const:2, geom:0.3, poisson:2.5, gw+:const:2, periodic:2,3,4")
    add("--tree", default=S, help="small fixed tree for oracle: twovertex, sixvertex, fixed:2,2,1,0,0,0")
    add("--lambda", dest="lambda", type=_floats, default=S, help="rate or comma-separated grid")
    add("--reps", type=int, default=S)
    add("--max-time", dest="max_time", type=float, default=S)
    add("--mass-cap", dest="mass_cap", type=int, default=S)
    add("--seed", type=int, default=S)
    add("--threads", type=int, default=S, help="worker processes (env TREECP_THREADS)")
    add("--output", "-o", default=S, help="output path, - for stdout")
    add("--format", choices=("csv", "jsonl"), default=S)
    add("--k", type=int, default=S)
    add("--M1", dest="m1", type=float, default=S)
    add("--rho", type=float, default=S)
    add("--t0", type=float, default=S)
    add("--ngrid", type=_ints, default=S)
    add("--R", dest="R", type=int, default=S)
    add("--T", dest="T", type=float, default=S)
    add("--radius", type=int, default=S)
    add("--tol", type=float, default=S)
    add("--bracket", type=_floats, default=S)
    add("--threshold", type=float, default=S)
    add("--epochs", type=int, default=S)
    add("--epoch-length", dest="epoch_length", type=float, default=S)
    add("--t", type=_floats, default=S, help="oracle times")
    add("--max-events", dest="max_events", type=int, default=S)
    add("--horizon", type=float, default=S)
    add("--trajectories", type=int, default=S)
    return p


def _normalize(cfg):
    lam = cfg["lambda"]
    cfg["lambda"] = [float(x) for x in (lam if isinstance(lam, (list, tuple)) else [lam])]
    for key in ("ngrid", "bracket", "t"):
        v = cfg[key]
        if not isinstance(v, (list, tuple)):
            cfg[key] = _ints(v) if key == "ngrid" else _floats(v)
        cfg[key] = list(cfg[key])
    return cfg


def parse_config(argv, config_file=None):
    """Resolve defaults, config file and flags into one validated dict."""
    ns = vars(build_parser().parse_args(argv))
    path = ns.pop("config") or config_file
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(DEFAULTS) - {"command"})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "command" in data and data["command"] != ns["command"]:
            raise ConfigError("config file command differs from the command line")
        cfg.update({k: v for k, v in data.items() if k != "command"})
    cfg.update(ns)
    cfg = _normalize(cfg)
    _validate(cfg)
    return cfg


def _validate(cfg):
    cmd = cfg["command"]
    if cfg["reps"] < 1:
        raise ConfigError("reps must be >= 1")
    if cfg["threads"] is not None and cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if any(x < 0 or not math.isfinite(x) for x in cfg["lambda"]):
        raise ConfigError("rates must be finite and non-negative")
    if not cfg["lambda"]:
        raise ConfigError("at least one rate is needed")
    try:
        topo = parse_topology(cfg["tree"] if cmd == "oracle" else cfg["topology"])
    except ValueError as exc:
        raise ConfigError(f"invalid topology: {exc}") from exc
    cfg["_topology"] = topo
    if isinstance(topo, Periodic):
        cfg["kappa"], cfg["gamma"] = topo.kappa, topo.gamma
    if cmd in ("u", "beta", "weight", "gap") and not isinstance(topo, Periodic):
        raise ConfigError(f"{cmd} needs a periodic topology")
    if cmd == "oracle" and not isinstance(topo, Fixed):
        raise ConfigError("oracle needs a fixed small tree")
    if cmd in ("lambda1", "lambda2", "gap"):
        b = cfg["bracket"]
        if len(b) != 2 or not 0 <= b[0] < b[1]:
            raise ConfigError("bracket must be two rates lo < hi")
        if not cfg["tol"] > 0:
            raise ConfigError("tol must be positive")
    if cmd == "couple" and len(cfg["lambda"]) != 2:
        raise ConfigError("couple needs --lambda HIGH,LOW")
    if cmd == "beta" and len(cfg["ngrid"]) < 3:
        raise ConfigError("beta needs at least three grid points")
    if cmd == "oracle" and any(t <= 0 for t in cfg["t"]):
        raise ConfigError("oracle times must be positive")
    if cfg["trajectories"] and cfg["format"] != "jsonl":
        raise ConfigError("trajectories are emitted as JSON lines only")


class Degenerate(RuntimeError):
    pass


# -- per-replication helpers (module level so worker processes can load them)

def _trajectory(seed, topology, lam, epochs, epoch_length, rho, mass_cap):
    state = E.init_process(LazyTree(topology, seed), lam, seed=seed)
    out = E.run(state, E.StopCondition(max_time=epochs * epoch_length, max_infected=mass_cap),
                epoch=epoch_length, rhos=(rho,) if rho else ())
    return out.snapshot.epochs


def _couple_rep(seed, topology, lam_high, lam_low, max_events, max_time):
    res = E.coupled_run(LazyTree(topology, seed), lam_high, lam_low,
                        E.StopCondition(max_events=max_events, max_time=max_time), seed=seed, check=True)
    return res.violations, res.first_discrepancy, res.events


# -- commands ------------------------------------------------------------

def _params(cfg, **extra):
    base = {"topology": cfg["topology"]}
    base.update(extra)
    return base


def _trajectory_records(cfg, topo, lam):
    n = cfg["trajectories"]
    if not n:
        return []
    rows = replicate(_trajectory, n, cfg["seed"], cfg["threads"], topology=topo, lam=lam,
                     epochs=cfg["epochs"], epoch_length=cfg["epoch_length"], rho=cfg["rho"],
                     mass_cap=cfg["mass_cap"])
    out = []
    for r, epochs in enumerate(rows):
        for t, ni, nf, root, w in epochs:
            out.append({"rep": r, "t": t, "n_infected": ni, "n_frontier": nf,
                        "root_infected": root, "w": list(w)})
    return out


def cmd_survive(cfg, topo):
    recs = []
    for lam in cfg["lambda"]:
        est = A.estimate_survival(topo, lam, cfg["reps"], cfg["max_time"], cfg["mass_cap"],
                                  cfg["seed"], cfg["threads"])
        recs.append(est.record("survive", _params(cfg, **est.protocol)))
        recs.extend(_trajectory_records(cfg, topo, lam))
    return recs


def cmd_growth(cfg, topo):
    recs = []
    for lam in cfg["lambda"]:
        try:
            g = A.estimate_growth_rate(topo, lam, cfg["reps"], cfg["epochs"], cfg["epoch_length"],
                                       cfg["seed"], cfg["threads"], mass_cap=cfg["mass_cap"])
        except A.DegenerateResult as exc:
            raise Degenerate(str(exc)) from exc
        recs.append(g.epoch.record("growth_epoch", _params(cfg, **g.epoch.protocol)))
        recs.append(g.doubling.record("growth_doubling", _params(cfg, **g.doubling.protocol)))
        recs.extend(_trajectory_records(cfg, topo, lam))
    return recs


def cmd_u(cfg, topo):
    recs = []
    kappa = topo.kappa
    for lam in cfg["lambda"]:
        ns = tuple(n * kappa for n in cfg["ngrid"])
        u = A.estimate_u_many(topo, lam, ns, cfg["reps"], cfg["max_time"], cfg["seed"],
                              cfg["threads"], cfg["mass_cap"])
        for n in ns:
            recs.append(u[n].record("u", _params(cfg, **u[n].protocol)))
        grid = set(cfg["ngrid"])
        for m in sorted(grid):
            for n in sorted(grid):
                if m <= n and m + n in grid:
                    gap, se = A.subadditivity_gap(u, kappa, m, n)
                    recs.append({"op": "subadditivity_gap",
                                 "params": _params(cfg, **{"lambda": lam, "m": m, "n": n}),
                                 "value": gap, "ci_lo": gap - A.Z95 * se, "ci_hi": gap + A.Z95 * se,
                                 "n": cfg["reps"], "censored": u.censored, "seed": cfg["seed"]})
    return recs


def cmd_beta(cfg, topo):
    recs = []
    degenerate = False
    for lam in cfg["lambda"]:
        b = A.estimate_beta(topo, lam, cfg["ngrid"], cfg["reps"], cfg["max_time"], cfg["seed"],
                            cfg["threads"], cfg["mass_cap"])
        degenerate |= b.degenerate
        params = _params(cfg, **{"lambda": lam, "ngrid": cfg["ngrid"], "sup_form": b.sup_form})
        recs.append({"op": "beta", "params": params, "value": b.value, "ci_lo": b.ci[0],
                     "ci_hi": b.ci[1], "n": cfg["reps"], "censored": b.u.censored, "seed": cfg["seed"]})
        lo, hi = A.beta_bounds(lam, topo.kappa, topo.gamma)
        recs.append({"op": "beta_bounds", "params": _params(cfg, **{"lambda": lam}), "value": None,
                     "ci_lo": lo, "ci_hi": hi, "n": None, "censored": None, "seed": None})
    if degenerate:
        raise Degenerate("some u(n kappa) estimate is zero", recs)
    return recs


def _rho(cfg, topo):
    return cfg["rho"] if cfg["rho"] is not None else A.rho_critical(topo.kappa, topo.gamma)


def cmd_weight(cfg, topo):
    recs = []
    rho = _rho(cfg, topo)
    for lam in cfg["lambda"]:
        sm = A.supermartingale_diagnostic(topo, lam, rho, cfg["t0"], cfg["reps"], cfg["seed"],
                                          cfg["threads"], cfg["mass_cap"])
        for est in sm.per_type:
            recs.append(est.record("weight", _params(cfg, **est.protocol)))
        recs.append(sm.estimate.record("weight_max", _params(cfg, **sm.estimate.protocol)))
    return recs


def _weak(cfg):
    return A.WeakSurvival(cfg["threshold"], cfg["max_time"], cfg["mass_cap"])


def _strong(cfg):
    return A.StrongSurvival(cfg["R"], cfg["T"], cfg["threshold"], cfg["mass_cap"], cfg["radius"])


def _bisect(cfg, topo, indicator, op):
    try:
        res = A.bisect_critical(topo, indicator, cfg["bracket"], cfg["tol"], cfg["reps"],
                                cfg["seed"], cfg["threads"])
    except A.BracketError as exc:
        raise ConfigError(f"bracket does not straddle the threshold: {exc}") from exc
    lo, hi = res.bracket
    recs = [{"op": op, "params": _params(cfg, iterations=res.iterations, tol=cfg["tol"]),
             "value": res.midpoint, "ci_lo": lo, "ci_hi": hi, "n": cfg["reps"], "censored": None,
             "seed": cfg["seed"]}]
    for lam, ok, est in res.trace:
        recs.append(est.record(op + "_eval", _params(cfg, **dict(est.protocol, passed=ok))))
    return recs, res


def cmd_lambda1(cfg, topo):
    return _bisect(cfg, topo, _weak(cfg), "lambda1")[0]


def cmd_lambda2(cfg, topo):
    return _bisect(cfg, topo, _strong(cfg), "lambda2")[0]


def cmd_gap(cfg, topo):
    r1, b1 = _bisect(cfg, topo, _weak(cfg), "lambda1")
    r2, b2 = _bisect(cfg, topo, _strong(cfg), "lambda2")
    ordered = b2.bracket[0] >= b1.bracket[0]
    recs = r1 + r2
    recs.append({"op": "gap", "params": _params(cfg, ordered=ordered),
                 "value": b2.midpoint - b1.midpoint, "ci_lo": b2.bracket[0] - b1.bracket[1],
                 "ci_hi": b2.bracket[1] - b1.bracket[0], "n": cfg["reps"], "censored": None,
                 "seed": cfg["seed"]})
    return recs


def cmd_couple(cfg, topo):
    hi, lo = cfg["lambda"]
    if lo > hi:
        hi, lo = lo, hi
    rows = replicate(_couple_rep, cfg["reps"], cfg["seed"], cfg["threads"], topology=topo,
                     lam_high=hi, lam_low=lo, max_events=cfg["max_events"], max_time=cfg["max_time"])
    viol = sum(r[0] for r in rows)
    disc = sum(1 for r in rows if math.isfinite(r[1]))
    params = _params(cfg, lambda_high=hi, lambda_low=lo, max_events=cfg["max_events"])
    recs = [{"op": "couple_violations", "params": params, "value": viol, "ci_lo": None,
             "ci_hi": None, "n": cfg["reps"], "censored": None, "seed": cfg["seed"]}]
    recs.append(A.proportion(disc, cfg["reps"], seed=cfg["seed"]).record("couple_discrepancy", params))
    times = [r[1] for r in rows if math.isfinite(r[1])]
    if len(times) >= 2:
        recs.append(A.mean_estimate(times, censored=cfg["reps"] - len(times), seed=cfg["seed"])
                    .record("couple_first_discrepancy", params))
    return recs


def cmd_cmj(cfg, topo):
    recs = []
    for lam in cfg["lambda"]:
        cs = cmj.extract_comparison(topo, lam, cfg["k"], cfg["m1"], cfg["reps"], cfg["seed"], cfg["threads"])
        p = _params(cfg, **{"lambda": lam, "k": cfg["k"], "M1": cfg["m1"]})
        recs.append(cs.success_rate.record("cmj_success_rate", p))
        recs.append(cs.offspring_mean.record("cmj_offspring_mean", p))
        recs.append(cs.p_reached.record("cmj_p_reached", p))
        bound = cmj.success_lower_bound(lam)
        recs.append({"op": "cmj_success_bound", "params": p, "value": bound, "ci_lo": None,
                     "ci_hi": None, "n": None, "censored": None, "seed": None})
        if cs.p_reached.value == 0 or cs.success_rate.value == 0:
            raise Degenerate("no comparison births", recs)
        spec = cs.cmj_spec(cfg["k"])
        c = cmj.malthusian(spec.measure())
        recs.append({"op": "cmj_malthusian", "params": p, "value": c, "ci_lo": None, "ci_hi": None,
                     "n": cfg["reps"], "censored": cs.p_reached.censored, "seed": cfg["seed"]})
        for r in range(cfg["trajectories"]):
            tr = cmj.simulate_cmj(spec, cfg["horizon"], seed=(cfg["seed"], r))
            for t, z in zip(tr.times, tr.Z):
                recs.append({"rep": r, "t": t, "Z": z})
    return recs


def cmd_oracle(cfg, topo):
    recs = []
    worst = 0.0
    for lam in cfg["lambda"]:
        rows = oracle.compare(topo, lam, cfg["t"], cfg["reps"], cfg["seed"])
        fails = 0
        for row in rows:
            if row["se"] > 0:
                worst = max(worst, abs(row["sim"] - row["exact"]) / row["se"])
            fails += not row["ok"]
            recs.append({"op": "oracle_state",
                         "params": {"tree": cfg["tree"], "lambda": lam, "t": row["t"], "state": row["state"],
                                    "exact": row["exact"]},
                         "value": row["sim"], "ci_lo": row["sim"] - 3 * row["se"],
                         "ci_hi": row["sim"] + 3 * row["se"], "n": cfg["reps"], "censored": 0,
                         "seed": cfg["seed"]})
        recs.append({"op": "oracle_failures", "params": {"tree": cfg["tree"], "lambda": lam, "z": 3.0},
                     "value": fails, "ci_lo": None, "ci_hi": None, "n": len(rows), "censored": 0,
                     "seed": cfg["seed"]})
    return recs


HANDLERS = {name: globals()["cmd_" + name] for name in COMMANDS}


def run_experiment(cfg, stream):
    """Run one command and write its records; returns the exit code."""
    head = io.header({k: v for k, v in cfg.items() if not k.startswith("_")}, __version__)
    writer = io.Writer(stream, cfg["format"], head)
    code = 0
    try:
        recs = HANDLERS[cfg["command"]](cfg, cfg["_topology"])
    except Degenerate as exc:
        recs = exc.args[1] if len(exc.args) > 1 else []
        print(f"treecp: degenerate result: {exc.args[0]}", file=sys.stderr)
        code = 2
    for rec in recs:
        writer.write(rec)
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        cfg["threads"] = resolve_threads(cfg["threads"])
        if cfg["output"] == "-":
            return run_experiment(cfg, sys.stdout)
        with open(cfg["output"], "w", newline="") as fh:
            return run_experiment(cfg, fh)
    except ConfigError as exc:
        print(f"treecp: configuration error: {exc}", file=sys.stderr)
        return 1
    except (E.EngineError, OSError) as exc:
        print(f"treecp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
