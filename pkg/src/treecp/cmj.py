"""Crump-Mode-Jagers processes and the comparison process extracted from runs."""
from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _codes as C
from . import engine as E
from . import rng
from .analysis import Estimate, Z95, covariance_estimate, mean_estimate, proportion
from .parallel import replicate
from .trees import BinomialLaw, FiniteSupport, LazyTree, sampler_table


@dataclass(frozen=True)
class ReproductionMeasure:
    """Expected number of births as a finite atomic measure on (0, inf)."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(t), float(w)) for t, w in self.atoms)
        for (t, w) in atoms:
            if not t > 0 or w < 0:
                raise ValueError("atoms need positive times and non-negative weights")
        if any(b[0] <= a[0] for a, b in zip(atoms, atoms[1:])):
            raise ValueError("atom times must be strictly increasing")
        object.__setattr__(self, "atoms", atoms)

    @property
    def total(self):
        return math.fsum(w for _, w in self.atoms)

    def laplace(self, c):
        return math.fsum(w * math.exp(-c * t) for t, w in self.atoms)


def malthusian(measure, tol=1e-10):
    """The c with sum_i w_i exp(-c t_i) = 1."""
    if not measure.atoms:
        raise ValueError("empty reproduction measure")
    total = measure.total
    if total <= 0:
        raise ValueError("the measure needs positive total weight")
    if total == 1.0:
        return 0.0

    def g(c):
        return measure.laplace(c) - 1.0

    # g is strictly decreasing; widen the bracket until the signs differ
    lo, hi = -1.0, 1.0
    while g(lo) < 0:
        lo *= 2.0
    while g(hi) > 0:
        hi *= 2.0
    c = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(g(c)) > tol:
        # a couple of Newton steps for very steep measures
        for _ in range(50):
            d = -math.fsum(w * t * math.exp(-c * t) for t, w in measure.atoms)
            c -= g(c) / d
            if abs(g(c)) <= tol:
                break
    return c


def measure_from_sample(offspring_mean, tau_sample, deadline):
    """Expected-birth measure: offspring_mean * P(tau in dt, tau < deadline)."""
    taus = sorted(t for t in tau_sample if t is not None and t < deadline)
    n = len(tau_sample)
    if not taus:
        raise ValueError("no births before the deadline")
    atoms = {}
    for t in taus:
        t = max(t, 1e-12)
        atoms[t] = atoms.get(t, 0.0) + offspring_mean / n
    return ReproductionMeasure(tuple(sorted(atoms.items())))


@dataclass(frozen=True)
class CmjSpec:
    """Each particle gives birth once, at age tau, if tau < deadline.

    ``birth_time`` is either a number (a fixed atom) or a sequence of sampled
    times; None entries in a sample stand for censored (never reached)
    values. A particle leaves the population at age min(tau, deadline).
    """

    offspring: object
    birth_time: object
    deadline: float

    def __post_init__(self):
        if not math.isfinite(self.deadline) or self.deadline <= 0:
            raise ValueError("the birth deadline must be finite and positive")
        if not isinstance(self.birth_time, (int, float)):
            object.__setattr__(self, "birth_time", tuple(self.birth_time))
            if not self.birth_time:
                raise ValueError("empty birth-time sample")

    def p_birth(self):
        if isinstance(self.birth_time, (int, float)):
            return 1.0 if self.birth_time < self.deadline else 0.0
        ok = sum(1 for t in self.birth_time if t is not None and t < self.deadline)
        return ok / len(self.birth_time)

    def thinned_law(self):
        """Offspring law of the embedded generation process."""
        p = self.p_birth()
        vals, probs = self.offspring.pmf()
        mass = {0: 1.0 - p}
        for v, q in zip(vals, probs):
            mass[v] = mass.get(v, 0.0) + p * q
        pairs = tuple((v, q) for v, q in sorted(mass.items()) if q > 0)
        total = math.fsum(q for _, q in pairs)
        return FiniteSupport(tuple((v, q / total) for v, q in pairs))

    def measure(self):
        m = self.offspring.mean()
        if isinstance(self.birth_time, (int, float)):
            if self.birth_time >= self.deadline:
                raise ValueError("no births before the deadline")
            return ReproductionMeasure(((max(float(self.birth_time), 1e-12), m),))
        return measure_from_sample(m, self.birth_time, self.deadline)


@dataclass
class CmjTrajectory:
    times: tuple
    Z: tuple
    extinct: bool
    capped: bool


def simulate_cmj(spec, horizon, seed=0, sample_times=None, max_pop=10 ** 5):
    """Event-driven CMJ run; Z at each sample time counts living particles.

    The run stops at ``horizon``, at extinction, or once ``max_pop`` particles
    are alive (``capped``). ``extinct`` reports extinction before stopping.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if sample_times is None:
        sample_times = () if not math.isfinite(horizon) else tuple(np.linspace(0, horizon, 11))
    sample_times = tuple(float(t) for t in sample_times)
    gen = rng.as_generator(seed, rng.PROCESS)
    cdf, vals = sampler_table(spec.offspring)
    fixed = isinstance(spec.birth_time, (int, float))
    sample = None if fixed else spec.birth_time
    deadline = spec.deadline

    buf = []

    def draw():
        if not buf:
            buf.extend(gen.random(256).tolist()[::-1])
        return buf.pop()

    def lifetime():
        if fixed:
            tau = float(spec.birth_time)
        else:
            tau = sample[int(draw() * len(sample))]
            if tau is None:
                tau = math.inf
        return (tau, True) if tau < deadline else (deadline, False)

    heap = []
    life, births = lifetime()
    heapq.heappush(heap, (life, 0, births))
    seq = 1
    alive = 1
    Z = []
    si = 0
    capped = False
    while heap:
        t, _, gives = heap[0]
        while si < len(sample_times) and sample_times[si] < t:
            Z.append(alive)
            si += 1
        if t > horizon:
            break
        heapq.heappop(heap)
        alive -= 1
        if gives:
            kids = vals[bisect_right(cdf, draw())]
            for _ in range(kids):
                life, b = lifetime()
                heapq.heappush(heap, (t + life, seq, b))
                seq += 1
            alive += kids
        if alive >= max_pop:
            capped = True
            break
    while si < len(sample_times):
        Z.append(alive if not capped else None)
        si += 1
    return CmjTrajectory(sample_times, tuple(Z), alive == 0, capped)


@dataclass
class LimitSummary:
    times: tuple
    w_mean: tuple
    var_early: float
    var_late: float
    p_positive: float
    p_extinct: float
    w_max: float
    survivors: int


def limit_diagnostic(trajectories, c):
    """Track W(t) = Z_t / exp(c t) along trajectories.

    The across-time variance of W on surviving trajectories is compared
    between the first and second half of the sample times.
    """
    if not trajectories:
        raise ValueError("no trajectories")
    times = np.asarray(trajectories[0].times, dtype=float)
    surv = [tr for tr in trajectories if tr.Z and tr.Z[-1] not in (None, 0)]
    n = len(trajectories)
    p_ext = sum(tr.extinct for tr in trajectories) / n
    if not surv:
        return LimitSummary(tuple(times), tuple(0.0 for _ in times), 0.0, 0.0, 0.0, p_ext, 0.0, 0)
    W = np.array([[z / math.exp(c * t) for z, t in zip(tr.Z, times)] for tr in surv], dtype=float)
    half = len(times) // 2
    var_early = float(np.mean(W[:, :half].var(axis=1, ddof=1))) if half > 1 else float("nan")
    var_late = float(np.mean(W[:, half:].var(axis=1, ddof=1)))
    return LimitSummary(tuple(times), tuple(W.mean(axis=0)), var_early, var_late,
                        len(surv) / n, p_ext, float(W.max()), len(surv))


# -- comparison process from the contact process --------------------------

def _comparison_rep(seed, topology, lam, k, M1):
    tree = LazyTree(topology, seed)
    state = E.init_process(tree, lam, seed=seed)
    out = E.run(state, E.StopCondition(max_time=M1, frontier_target=k))
    if out.reason != "FrontierReached":
        return None, ()
    tau = out.at
    lad = state.ladder
    arena = tree.arena
    front = sorted(state.frontier())[:k]
    kids = []
    for v in front:
        for c in arena.children(v):
            if not lad.is_ever(c, 0):
                kids.append(c)
                break
    lad.advance(tau + 1.0)
    return tau, tuple(lad.is_infected(c, 0) for c in kids)


@dataclass
class ComparisonSample:
    offspring: list
    tau: list
    success_rate: Estimate
    offspring_mean: Estimate
    p_reached: Estimate
    pair_covariance: Estimate | None
    successes: list

    def empirical_law(self):
        counts = {}
        for x in self.offspring:
            counts[x] = counts.get(x, 0) + 1
        n = len(self.offspring)
        return FiniteSupport(tuple((v, c / n) for v, c in sorted(counts.items())))

    def cmj_spec(self, k):
        return CmjSpec(self.empirical_law(), tuple(self.tau), float(self.success_rate.protocol["M1"]))


def success_lower_bound(lam):
    """exp(-2) (1 - exp(-lam)): chance a frontier vertex passes the infection on."""
    return math.exp(-2.0) * -math.expm1(-lam)


def extract_comparison(topology, lam, k, M1, reps, seed=0, threads=None):
    """Run to tau_k (censored at M1) and test one unexplored child per frontier vertex.

    A child succeeds if it is infected one time unit after tau_k. The
    per-child success rate uses a cluster (per replication) standard error.
    """
    rows = replicate(_comparison_rep, reps, seed, threads, topology=topology, lam=lam, k=k, M1=M1)
    tau = [r[0] for r in rows]
    offspring = [sum(r[1]) for r in rows]
    reached = [r for r in rows if r[0] is not None]
    proto = {"lambda": lam, "k": k, "M1": M1}
    if reached:
        tot = np.array([sum(r[1]) for r in reached], dtype=float)
        m = np.array([len(r[1]) for r in reached], dtype=float)
        rate = tot.sum() / m.sum()
        n = len(reached)
        resid = tot - rate * m
        se = float(math.sqrt((resid ** 2).sum() / (n * (n - 1))) / m.mean()) if n > 1 else float("inf")
        sr = Estimate(float(rate), (rate - Z95 * se, rate + Z95 * se), n, censored=reps - n,
                      seed=seed, protocol=proto, se=se)
    else:
        sr = Estimate(0.0, (0.0, 0.0), reps, censored=reps, seed=seed, protocol=proto, se=0.0)
    pair = None
    two = [r[1] for r in reached if len(r[1]) >= 2]
    if len(two) >= 2:
        pair = covariance_estimate([s[0] for s in two], [s[1] for s in two], seed=seed, protocol=proto)
    return ComparisonSample(offspring, tau, sr,
                            mean_estimate(offspring, seed=seed, protocol=proto),
                            proportion(len(reached), reps, seed=seed, protocol=proto),
                            pair, [r[1] for r in rows])


def comparison_offspring_law(k, lam):
    return BinomialLaw(k, success_lower_bound(lam))
