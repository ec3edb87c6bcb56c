"""Estimators, closed-form calculators and fixed-point solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _codes as C
from . import engine as E
from .parallel import replicate
from .trees import LazyTree, Periodic, sampler_table

Z95 = 1.959963984540054


class DegenerateResult(RuntimeError):
    """Raised when an estimator has nothing to average (e.g. no survivors)."""


# -- estimates -----------------------------------------------------------

@dataclass
class Estimate:
    value: float
    ci: tuple
    n: int
    censored: int = 0
    seed: object = None
    protocol: dict = field(default_factory=dict)
    se: float = float("nan")

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("an estimate needs n >= 1")

    @property
    def lo(self):
        return self.ci[0]

    @property
    def hi(self):
        return self.ci[1]

    def record(self, op, params=None):
        return {
            "op": op,
            "params": params if params is not None else self.protocol,
            "value": self.value,
            "ci_lo": self.ci[0],
            "ci_hi": self.ci[1],
            "n": self.n,
            "censored": self.censored,
            "seed": self.seed,
        }


def wilson(successes, n, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def proportion(successes, n, **kw):
    p = successes / n
    lo, hi = wilson(successes, n)
    return Estimate(p, (min(lo, p), max(hi, p)), n, se=math.sqrt(p * (1 - p) / n), **kw)


def mean_estimate(samples, **kw):
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n == 0:
        raise DegenerateResult("no samples")
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return Estimate(m, (m - Z95 * se, m + Z95 * se), n, se=se, **kw)


def _tree_for(topology, seed):
    return LazyTree(topology, seed)


# -- survival ------------------------------------------------------------

def _survival_rep(seed, topology, lam, max_time, mass_cap):
    state = E.init_process(_tree_for(topology, seed), lam, seed=seed)
    out = E.run(state, E.StopCondition(max_time=max_time, max_infected=mass_cap))
    return out.reason


def estimate_survival(topology, lam, reps, max_time, mass_cap=E.DEFAULT_MASS_CAP, seed=0, threads=None):
    """Fraction of runs alive at ``max_time`` or reaching ``mass_cap`` infected.

    Runs still alive at the horizon without reaching the cap are counted as
    survivors and reported as censored.
    """
    reasons = replicate(_survival_rep, reps, seed, threads, topology=topology, lam=lam,
                        max_time=max_time, mass_cap=mass_cap)
    alive = sum(r != "Extinct" for r in reasons)
    censored = sum(r == "TimeCap" for r in reasons)
    proto = {"max_time": max_time, "mass_cap": mass_cap, "lambda": lam}
    return proportion(alive, reps, censored=censored, seed=seed, protocol=proto)


def _survival_ladder_rep(seed, topology, lams, max_time, mass_cap):
    outs, _ = E.ladder_run(_tree_for(topology, seed), lams,
                           E.StopCondition(max_time=max_time, max_infected=mass_cap), seed=seed)
    return [o.reason for o in outs]


def survival_curve(topology, lams, reps, max_time, mass_cap=E.DEFAULT_MASS_CAP, seed=0, threads=None):
    """Survival estimates over a rate grid driven by common random numbers.

    Every replication runs all rates on one coupled realization, so the
    per-replication indicator is monotone in the rate.
    """
    rows = replicate(_survival_ladder_rep, reps, seed, threads, topology=topology,
                     lams=list(lams), max_time=max_time, mass_cap=mass_cap)
    out = []
    for i, lam in enumerate(lams):
        alive = sum(r[i] != "Extinct" for r in rows)
        cens = sum(r[i] == "TimeCap" for r in rows)
        out.append(proportion(alive, reps, censored=cens, seed=seed,
                              protocol={"lambda": lam, "max_time": max_time, "mass_cap": mass_cap}))
    return out, rows


# -- growth --------------------------------------------------------------

def _slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm = x - x.mean()
    return float((xm * (y - y.mean())).sum() / (xm * xm).sum())


def _growth_rep(seed, topology, lam, epochs, epoch_length, mass_cap):
    state = E.init_process(_tree_for(topology, seed), lam, seed=seed)
    horizon = epochs * epoch_length
    out = E.run(state, E.StopCondition(max_time=horizon, max_infected=mass_cap),
                epoch=epoch_length, doubling=True)
    sizes = [e[1] for e in out.snapshot.epochs][:epochs + 1]
    dtimes = state.ladder.state()["dtimes"][0]
    return out.reason, sizes, dtimes


@dataclass
class GrowthEstimate:
    epoch: Estimate
    doubling: Estimate
    survivors: int
    reps: int


def estimate_growth_rate(topology, lam, reps, epochs, epoch_length, seed=0, threads=None,
                         mass_cap=None, target_survivors=None, burn_in=0.0):
    """Exponential growth rate of |xi_t| on surviving runs.

    The main estimate is the least-squares slope of log|xi| against time at
    the epoch grid, averaged over runs alive at every epoch. The companion
    estimate regresses log(2^i) on the first passage times to 2^i infected.
    With ``target_survivors`` the first that many surviving replications
    (in replication order) are used, running more batches if needed. Both
    regressions only use times at or after ``burn_in``.
    """
    if epochs < 2:
        raise ValueError("need at least two epochs")
    t_all = [j * epoch_length for j in range(epochs + 1)]
    keep = [j for j, t in enumerate(t_all) if t >= burn_in]
    if len(keep) < 2:
        raise ValueError("need at least two epochs after the burn-in")
    kw = dict(topology=topology, lam=lam, epochs=epochs, epoch_length=epoch_length, mass_cap=mass_cap)
    rows = replicate(_growth_rep, reps, seed, threads, **kw)
    if target_survivors is not None:
        while sum(r[0] == "TimeCap" for r in rows) < target_survivors and len(rows) < 100 * reps:
            extra = replicate(_growth_rep_offset, reps, seed, threads, offset=len(rows), **kw)
            rows.extend(extra)
    slopes, dslopes = [], []
    used = 0
    for reason, sizes, dtimes in rows:
        if reason != "TimeCap" or len(sizes) < epochs + 1 or min(sizes) <= 0:
            continue
        slopes.append(_slope([t_all[j] for j in keep], np.log([sizes[j] for j in keep])))
        pts = [(t, math.log(2.0) * (i + 1)) for i, t in enumerate(dtimes) if t >= burn_in]
        if len(pts) >= 2 and pts[-1][0] > pts[0][0]:
            dslopes.append(_slope([p[0] for p in pts], [p[1] for p in pts]))
        used += 1
        if target_survivors is not None and used >= target_survivors:
            break
    if not slopes:
        raise DegenerateResult("no survivors")
    proto = {"lambda": lam, "epochs": epochs, "epoch_length": epoch_length, "burn_in": burn_in}
    censored = len(rows) - used
    ep = mean_estimate(slopes, censored=censored, seed=seed, protocol=proto)
    if len(dslopes) < 2:
        raise DegenerateResult("too few doubling times")
    db = mean_estimate(dslopes, seed=seed, protocol=dict(proto, estimator="doubling"))
    return GrowthEstimate(ep, db, used, len(rows))


def _growth_rep_offset(seed, offset, **kw):
    root, rep = seed
    return _growth_rep((root, rep + offset), **kw)


# -- u(n) and beta -------------------------------------------------------

def _u_rep(seed, topology, lam, ns, max_time, mass_cap):
    tree = _tree_for(topology, seed)
    targets = [tree.chain(n) for n in ns]
    state = E.init_process(tree, lam, seed=seed)
    out = E.run(state, E.StopCondition(max_time=max_time, max_infected=mass_cap,
                                       target_vertex=tuple(targets)))
    lad = state.ladder
    return [lad.hit_time(i, 0) >= 0.0 for i in range(len(ns))], out.reason


@dataclass
class UEstimates:
    ns: tuple
    estimates: dict
    hits: np.ndarray
    censored: int

    def __getitem__(self, n):
        return self.estimates[n]


def estimate_u_many(topology, lam, ns, reps, max_time, seed=0, threads=None,
                    mass_cap=E.DEFAULT_MASS_CAP):
    """P(e_n is ever infected) for several n from one set of runs."""
    if not isinstance(topology, Periodic):
        raise ValueError("u(n) is defined on periodic trees")
    ns = tuple(int(n) for n in ns)
    rows = replicate(_u_rep, reps, seed, threads, topology=topology, lam=lam, ns=ns,
                     max_time=max_time, mass_cap=mass_cap)
    hits = np.array([r[0] for r in rows], dtype=bool).reshape(reps, len(ns))
    censored = sum(r[1] in ("TimeCap", "MassCap") for r in rows)
    est = {}
    for j, n in enumerate(ns):
        est[n] = proportion(int(hits[:, j].sum()), reps, censored=censored, seed=seed,
                            protocol={"lambda": lam, "n": n, "max_time": max_time, "mass_cap": mass_cap})
    return UEstimates(ns, est, hits, censored)


def estimate_u(topology, lam, n, reps, max_time, seed=0, threads=None, mass_cap=E.DEFAULT_MASS_CAP):
    return estimate_u_many(topology, lam, (n,), reps, max_time, seed, threads, mass_cap)[n]


def subadditivity_gap(u, kappa, m, n):
    """u((m+n)k) - u(mk) u(nk) with a delta-method standard error.

    ``u`` must come from :func:`estimate_u_many` with all three indices, so
    that the covariance between the estimates is taken into account.
    """
    a, b, c = (m + n) * kappa, m * kappa, n * kappa
    idx = {v: i for i, v in enumerate(u.ns)}
    H = u.hits.astype(float)
    ya, yb, yc = H[:, idx[a]], H[:, idx[b]], H[:, idx[c]]
    pa, pb, pc = ya.mean(), yb.mean(), yc.mean()
    psi = (ya - pa) - pc * (yb - pb) - pb * (yc - pc)
    se = float(psi.std(ddof=1) / math.sqrt(len(psi)))
    return float(pa - pb * pc), se


@dataclass
class BetaEstimate:
    value: float
    ci: tuple
    sup_form: float
    se_log: float
    u: UEstimates
    degenerate: bool


def estimate_beta(topology, lam, n_grid, reps, max_time, seed=0, threads=None,
                  mass_cap=E.DEFAULT_MASS_CAP):
    """Spread exponent from the slope of log u(n kappa) against n.

    The standard error of the slope comes from the delta method on the
    per-replication hit indicators (the grid points share replications).
    Also returns the supremum form max_n u(n kappa)^(1/n).
    """
    n_grid = sorted(int(n) for n in n_grid)
    if len(n_grid) < 3:
        raise ValueError("need at least three grid points")
    kappa = topology.kappa
    ns = tuple(n * kappa for n in n_grid)
    u = estimate_u_many(topology, lam, ns, reps, max_time, seed, threads, mass_cap)
    p = u.hits.mean(axis=0)
    if np.any(p == 0.0):
        return BetaEstimate(float("nan"), (float("nan"), float("nan")), float("nan"),
                            float("nan"), u, True)
    x = np.asarray(n_grid, dtype=float)
    w = (x - x.mean()) / ((x - x.mean()) ** 2).sum()
    slope = float((w * np.log(p)).sum())
    psi = ((u.hits - p) / p) @ w
    se = float(psi.std(ddof=1) / math.sqrt(reps))
    sup = max(float(pi) ** (1.0 / n) for pi, n in zip(p, n_grid) if n > 0)
    return BetaEstimate(math.exp(slope), (math.exp(slope - Z95 * se), math.exp(slope + Z95 * se)),
                        sup, se, u, False)


# -- closed forms --------------------------------------------------------

def beta_bounds(lam, kappa, gamma):
    """Lower and upper bound on the spread exponent at the weak critical rate."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if gamma < 2:
        raise ValueError("gamma must be >= 2")
    lower = 0.0 if lam == 0 else math.exp(kappa * math.log(lam / (1.0 + lam)))
    return lower, 1.0 / gamma


def rho_critical(kappa, gamma):
    """The rho solving gamma * rho**(2 kappa) = 1."""
    if gamma == 1:
        raise ValueError("the period product must differ from 1")
    if gamma < 2:
        raise ValueError("gamma must be >= 2")
    return gamma ** (-1.0 / (2 * kappa))


def alpha_n(rho, d, n):
    """Level-weighted size of the sphere of radius n on the (d+1)-regular tree.

    Levels are measured against a fixed end, so d of the d+1 neighbours of
    a vertex sit one level below it.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1.0
    q = d * rho * rho
    if abs(q - 1.0) <= 1e-12:
        return rho ** (-n) * ((n + 1) - (n - 1) * rho * rho)
    return (d ** (n - 1) * rho ** n * (d * q - 1.0) + rho ** (-n) * (rho * rho - 1.0)) / (q - 1.0)


def block_weight_bound(rho, gamma, level):
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    return gamma / (1.0 - rho) * rho ** level


def block_weight_exact(periods, rho, root_type=0, level=0):
    """Sum of rho**level over the block: x and its descendants kappa-1 generations down."""
    tree = LazyTree(Periodic(tuple(periods), root_type))
    total, layer = 0.0, [0]
    for g in range(len(periods)):
        total += len(layer) * rho ** (level + g)
        if g + 1 < len(periods):
            layer = [c for v in layer for c in tree.realize_children(v)]
    return total


def alpha_k_bound(lam, prob_at_least_2, k):
    """Lower bound on one frontier-growth trial succeeding."""
    if k < 1:
        raise ValueError("k must be >= 1")
    base = lam / (1.0 + lam) * prob_at_least_2
    if base <= 0.0:
        return 0.0
    return math.exp((2 * k + 1) * math.log(base))


def pushback_failure(tail, lam, k, C, mu=None, alpha=None):
    """Failure probability of pushing the infection back, for the two tail regimes.

    ``tail`` is "Subexponential" (needs ``mu`` and ``alpha``) or
    "ExponentialTail". Evaluated in log space.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    if lam <= 0:
        return 1.0
    log_base = k * math.log(lam / (1.0 + lam))
    if tail == "Subexponential":
        if alpha is None or not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if mu is None or mu <= 1.0:
            raise ValueError("mu must exceed 1")
        expo = C * lam * lam * (k * math.log(mu)) ** (1.0 / alpha)
    elif tail == "ExponentialTail":
        expo = C * lam * lam * k
    else:
        raise ValueError(f"unknown tail class {tail!r}")
    inner = log_base + expo
    if inner > 700.0:
        return 0.0
    return math.exp(-math.exp(inner))


def recursion_fixed_point(c1, c2, L, tol=1e-12):
    """Largest root in (0, 1] of r = c1 (1 - (1 - c2 r)^L), or None.

    A positive root exists iff the slope at 0, c1 c2 L, exceeds 1. The map
    is concave, so Newton's method started at r = 1 decreases monotonically
    onto the largest root.
    """
    if not (0.0 < c1 <= 1.0 and 0.0 < c2 <= 1.0 and L > 0):
        raise ValueError("need c1, c2 in (0, 1] and L > 0")
    if c1 * c2 * L <= 1.0:
        return None

    def f(r):
        return c1 * -math.expm1(L * math.log1p(-c2 * r)) if c2 * r < 1.0 else c1

    r = 1.0
    for _ in range(200):
        g = f(r) - r
        if abs(g) <= tol:
            break
        base = 1.0 - c2 * r
        dg = c1 * c2 * L * base ** (L - 1.0) - 1.0 if base > 0 else -1.0
        step = g / dg
        r -= step
        if abs(step) <= 1e-16:
            break
    return r


def comparison_mean_offspring(k, lam, survival):
    if not 0.0 <= survival <= 1.0:
        raise ValueError("survival must lie in [0, 1]")
    return k * math.exp(-2.0) * -math.expm1(-lam) * survival / 2.0


def smallest_k(lam, survival, margin=1.0, k_max=10 ** 7):
    """Smallest k with comparison_mean_offspring(k, ...) > margin."""
    for k in range(1, k_max + 1):
        if comparison_mean_offspring(k, lam, survival) > margin:
            return k
    return None


def q0_bound(lam0, alpha):
    """Probability lower bound for a direct push along a path (formula only)."""
    return math.exp(-2.0 / alpha) * (math.exp(-lam0 / alpha) - math.exp(-2.0 * lam0 / alpha))


# -- supermartingale -----------------------------------------------------

def _weight_rep(seed, topology, lam, rho, t0, mass_cap):
    state = E.init_process(_tree_for(topology, seed), lam, seed=seed)
    out = E.run(state, E.StopCondition(max_time=t0, max_infected=mass_cap), rhos=(rho,))
    return out.snapshot.weights[rho], out.reason == "MassCap"


@dataclass
class SupermartingaleEstimate:
    estimate: Estimate
    per_type: list
    worst_type: int


def supermartingale_diagnostic(topology, lam, rho, t0, reps, seed=0, threads=None,
                               mass_cap=E.DEFAULT_MASS_CAP):
    """max over period types i of E[w_rho(xi_t0)] started from one type-i vertex."""
    if not isinstance(topology, Periodic):
        raise ValueError("needs a periodic topology")
    per_type = []
    for i in range(topology.kappa):
        topo_i = Periodic(topology.periods, i)
        rows = replicate(_weight_rep, reps, seed, threads, topology=topo_i, lam=lam, rho=rho,
                         t0=t0, mass_cap=mass_cap)
        est = mean_estimate([w for w, _ in rows], censored=sum(c for _, c in rows), seed=seed,
                            protocol={"lambda": lam, "rho": rho, "t0": t0, "type": i})
        per_type.append(est)
    worst = max(range(len(per_type)), key=lambda i: per_type[i].value)
    return SupermartingaleEstimate(per_type[worst], per_type, worst)


# -- critical values -----------------------------------------------------

@dataclass(frozen=True)
class WeakSurvival:
    threshold: float = 0.01
    max_time: float = 100.0
    mass_cap: int = 10 ** 5

    def evaluate(self, topology, lam, reps, seed, threads=None):
        est = estimate_survival(topology, lam, reps, self.max_time, self.mass_cap, seed, threads)
        return est.lo > self.threshold, est


def _strong_rep(seed, topology, lam, R, T, mass_cap, radius):
    tree = _tree_for(topology, seed)
    restr = E.Ball(0, radius) if radius is not None else None
    state = E.init_process(tree, lam, restr, seed=seed)
    out = E.run(state, E.StopCondition(max_time=T, max_infected=mass_cap, root_reentries=R))
    return out.reason


@dataclass(frozen=True)
class StrongSurvival:
    """At least R returns of the infection to the root by time T.

    With ``radius`` set, the process is confined to the ball of that radius
    around the root, which keeps the cost bounded above the weak critical
    rate. Runs that hit the mass cap first count as failures.
    """

    R: int = 20
    T: float = 200.0
    threshold: float = 0.01
    mass_cap: int = 10 ** 5
    radius: int | None = None

    def evaluate(self, topology, lam, reps, seed, threads=None):
        reasons = replicate(_strong_rep, reps, seed, threads, topology=topology, lam=lam, R=self.R,
                            T=self.T, mass_cap=self.mass_cap, radius=self.radius)
        ok = sum(r == "ReinfectionReached" for r in reasons)
        cens = sum(r == "MassCap" for r in reasons)
        est = proportion(ok, reps, censored=cens, seed=seed,
                         protocol={"lambda": lam, "R": self.R, "T": self.T, "radius": self.radius})
        return est.lo > self.threshold, est


@dataclass
class BisectionResult:
    bracket: tuple
    iterations: int
    trace: list

    @property
    def midpoint(self):
        return 0.5 * (self.bracket[0] + self.bracket[1])


class BracketError(ValueError):
    pass


def bisect_critical(topology, indicator, bracket, tol, reps=1, seed=0, threads=None):
    """Bisect on a monotone pass/fail indicator.

    ``indicator`` is a WeakSurvival / StrongSurvival instance or any callable
    mapping a rate to a bool. Every evaluation uses the same root seed.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise BracketError("bracket must satisfy lo < hi")
    trace = []

    def check(lam):
        if hasattr(indicator, "evaluate"):
            ok, est = indicator.evaluate(topology, lam, reps, seed, threads)
        else:
            ok, est = bool(indicator(lam)), None
        trace.append((lam, ok, est))
        return ok

    if check(lo):
        raise BracketError(f"indicator passes at the lower end {lo}")
    if not check(hi):
        raise BracketError(f"indicator fails at the upper end {hi}")
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if check(mid):
            hi = mid
        else:
            lo = mid
        it += 1
    return BisectionResult((lo, hi), it, trace)


# -- correlation ---------------------------------------------------------

def covariance_estimate(a, b, **kw):
    """P(A and B) - P(A) P(B) from paired indicators, with a delta-method CI."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    pa, pb, pab = a.mean(), b.mean(), (a * b).mean()
    psi = a * b - pab - pb * (a - pa) - pa * (b - pb)
    se = float(psi.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    d = float(pab - pa * pb)
    return Estimate(d, (d - Z95 * se, d + Z95 * se), n, se=se, **kw)


def _intervals(exits, entries, end):
    starts = [0.0] + list(entries)
    out = []
    for i, s in enumerate(starts):
        e = exits[i] if i < len(exits) else end
        out.append((s, min(e, end)))
    return out


def _visits(intervals, m, gap):
    """sigma_1..sigma_m: sigma_{i+1} = inf{t > sigma_i + gap : x infected}, sigma_0 = 0."""
    sig, thr = [], gap
    for s, e in intervals:
        while len(sig) < m:
            if e > thr or (e == thr and s == thr):
                t = max(s, thr)
                sig.append(t)
                thr = t + gap
            else:
                break
    return sig


def _corr_rep(seed, topology, lam, horizon, m, gap, M2):
    tree = _tree_for(topology, seed)
    state = E.init_process(tree, lam, E.SubtreePlusBranch(0), seed=seed)
    E.run(state, E.StopCondition(max_time=M2))
    st = state.ladder.state()
    ivs = _intervals(st["exits"][0], st["reinf"][0], M2)
    R = any(horizon <= t <= M2 for t in st["reinf"][0])
    sig = _visits(ivs, m, gap)
    G = len(sig) >= m and sig[m - 1] <= M2
    return R, G


def correlation_check(topology, lam, reps, seed=0, threads=None, horizon=3.0, m=3, gap=0.5, M2=5.0,
                      events=None):
    """P(R and G) - P(R) P(G) for two increasing events of one run.

    R: the root is reinfected (enters the infected set again) during [horizon, M2].
    G: the m-th recurrence time (gap ``gap``) of the root is at most M2.
    ``events`` may replace the run by any per-replication (R, G) generator.
    """
    fn = events if events is not None else _corr_rep
    kw = {} if events is not None else dict(topology=topology, lam=lam, horizon=horizon, m=m, gap=gap, M2=M2)
    rows = replicate(fn, reps, seed, threads, **kw)
    a = [r[0] for r in rows]
    b = [r[1] for r in rows]
    return covariance_estimate(a, b, seed=seed,
                               protocol={"lambda": lam, "horizon": horizon, "m": m, "gap": gap, "M2": M2})


# -- frontier growth trial -----------------------------------------------

def _trial_rep(seed, topology, lam, k):
    tree = _tree_for(topology, seed)
    state = E.init_process(tree, lam, seed=seed)
    arena = tree.arena
    need = 2 * k + 1
    births = 0
    while births < need:
        if state.n_infected() == 0:
            return False
        ev = E.next_event(state)
        if ev.kind == "recovery":
            return False
        if ev.kind == "infection":
            if arena.nchild[ev.target] < 2:
                return False
            births += 1
    return True


def frontier_trial(topology, lam, k, reps, seed=0, threads=None):
    """Frequency of 2k+1 births onto vertices with >= 2 children before any recovery."""
    ok = replicate(_trial_rep, reps, seed, threads, topology=topology, lam=lam, k=k)
    return proportion(sum(ok), reps, seed=seed, protocol={"lambda": lam, "k": k})


def max_offspring(topology):
    return max(sampler_table(topology.law)[1])
