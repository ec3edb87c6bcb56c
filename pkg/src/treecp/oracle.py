"""Exact transient law of the contact process on a small finite tree.

The process on n vertices is a continuous-time Markov chain on the 2^n
subsets of vertices (encoded as bitmasks). Its transient distribution is
computed with a dense matrix exponential; the simulated occupancy
frequencies are compared against it.
"""
import math

import numpy as np
from scipy.linalg import expm

from . import _codes as C
from . import rng
from ._backend import Arena, Ladder
from .trees import Fixed

MAX_VERTICES = 10


def generator(tree, lam):
    """Rate matrix Q (rows sum to zero) of the chain on subsets of vertices."""
    if not isinstance(tree, Fixed):
        raise TypeError("the exact oracle needs a fixed finite tree")
    n = tree.size
    if n > MAX_VERTICES:
        raise ValueError(f"at most {MAX_VERTICES} vertices")
    nbrs = [[] for _ in range(n)]
    for a, b in tree.edges():
        nbrs[a].append(b)
        nbrs[b].append(a)
    N = 1 << n
    Q = np.zeros((N, N))
    for s in range(N):
        for v in range(n):
            bit = 1 << v
            if s & bit:
                Q[s, s ^ bit] += 1.0
            else:
                m = sum(1 for w in nbrs[v] if s >> w & 1)
                if m:
                    Q[s, s | bit] += lam * m
        Q[s, s] = -Q[s].sum()
    return Q


def transient(tree, lam, t, start=1):
    """Distribution over bitmask states at time t, starting from ``start``."""
    Q = generator(tree, lam)
    p0 = np.zeros(Q.shape[0])
    p0[start] = 1.0
    return p0 @ expm(Q * t)


def _occupancy_rep(seed, counts, lam, epoch, n_epochs):
    arena = Arena(C.FIXED, rng.factory(seed, rng.STRUCTURE), (), (), (), 0, counts)
    n = arena.n
    lad = Ladder(arena, [lam], rng.factory(seed, rng.PROCESS), 0, [1] * n, [0] * n)
    lad.set_stop(epoch * n_epochs, 1 << 62, 0, 0)
    lad.set_epochs(epoch)
    lad.set_masks(True)
    lad.run()
    rec = lad.get_records()
    # layout per epoch: t, |xi|, |frontier|, root infected, mask
    return [int(rec[i + 4]) for i in range(0, len(rec), 5)]


def simulate_occupancy(tree, lam, times, reps, seed=0):
    """Empirical state frequencies at each time in ``times``.

    All times must be multiples of their smallest common grid step, taken
    here as the smallest time. Returns an array of shape (len(times), 2^n).
    """
    times = [float(t) for t in times]
    step = min(times)
    idx = [round(t / step) for t in times]
    if any(abs(i * step - t) > 1e-12 for i, t in zip(idx, times)):
        raise ValueError("times must be integer multiples of the smallest time")
    n_ep = max(idx)
    counts = tree.child_counts
    N = 1 << tree.size
    freq = np.zeros((len(times), N))
    for r in range(reps):
        masks = _occupancy_rep((seed, r), counts, lam, step, n_ep)
        # an extinct run stops recording; the empty set persists
        for j, i in enumerate(idx):
            freq[j, masks[i] if i < len(masks) else 0] += 1
    return freq / reps


def compare(tree, lam, times, reps, seed=0, z=3.0):
    """Per-state |p_hat - p| against z binomial standard errors of the exact p."""
    sim = simulate_occupancy(tree, lam, times, reps, seed)
    rows = []
    for j, t in enumerate(times):
        exact = transient(tree, lam, t)
        se = np.sqrt(np.clip(exact * (1 - exact), 0.0, None) / reps)
        dev = np.abs(sim[j] - exact)
        for s in range(len(exact)):
            ok = dev[s] <= z * se[s] if se[s] > 0 else dev[s] == 0.0
            rows.append({"t": t, "state": s, "exact": float(exact[s]), "sim": float(sim[j, s]),
                         "se": float(se[s]), "ok": bool(ok)})
    return rows
