"""Continuous-time contact process on lazily realized trees.

Recovery happens at rate 1 and every infected vertex fires arrows at rate
``lam`` to each neighbour. Events are generated by uniformization: proposals
arrive at rate ``|xi| * (1 + lam * max_degree)`` and a proposal whose slot
does not correspond to a real neighbour is discarded without being counted.
The accepted events therefore have exactly the per-edge law.

Several rates can share one realization (a "ladder"): the highest rate
drives the proposals and a lower rate ``lam_k`` accepts an infection arrow
iff its mark is below ``lam_k / lam_0``. Infected sets are nested at every
instant, which is what the coupling estimators rely on.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from . import _codes as C
from . import rng
from ._backend import Ladder
from .trees import LazyTree

INF = math.inf
DEFAULT_MASS_CAP = 10 ** 6


class EngineError(ValueError):
    pass


# -- restriction modes ---------------------------------------------------

@dataclass(frozen=True)
class NoRestriction:
    start: int = 0


@dataclass(frozen=True)
class Subtree:
    root: int


@dataclass(frozen=True)
class SubtreePlusBranch:
    """{x} together with the subtree of one child of x (the first by default)."""

    x: int
    child: int | None = None


@dataclass(frozen=True)
class Ball:
    center: int
    radius: int


@dataclass(frozen=True)
class Path:
    src: int
    dst: int


RestrictionMode = (NoRestriction, Subtree, SubtreePlusBranch, Ball, Path)


@dataclass(frozen=True)
class StopCondition:
    max_time: float | None = None
    max_infected: int | None = None
    frontier_target: int | None = None
    target_vertex: int | tuple | None = None
    reinfection_target: tuple | None = None
    root_reentries: int | None = None
    max_events: int | None = None

    def __post_init__(self):
        if all(getattr(self, f) is None for f in self.__dataclass_fields__):
            raise EngineError("a stop condition needs at least one bound")
        if self.max_time is not None and self.max_time < 0:
            raise EngineError("max_time must be non-negative")
        if self.frontier_target is not None and self.frontier_target < 1:
            raise EngineError("frontier_target must be >= 1")
        if self.reinfection_target is not None:
            m, gap = self.reinfection_target
            if m < 1 or gap < 0:
                raise EngineError("reinfection target needs m >= 1 and gap >= 0")

    def targets(self):
        t = self.target_vertex
        if t is None:
            return ()
        return (t,) if isinstance(t, int) else tuple(t)

    def describe(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if getattr(self, k) is not None}


@dataclass
class Snapshot:
    n_infected: int
    n_frontier: int
    weights: dict
    level_histogram: dict | None = None
    epochs: list = field(default_factory=list)


@dataclass
class Outcome:
    reason: str
    at: float
    snapshot: Snapshot

    @property
    def survived(self):
        return self.reason != "Extinct"


@dataclass(frozen=True)
class Event:
    kind: str
    time: float
    source: int | None
    target: int | None


@dataclass(frozen=True)
class Censored:
    """Result of a hitting-time query: ``time`` is None when censored."""

    time: float | None
    reason: str

    @property
    def censored(self):
        return self.time is None


# -- set-up --------------------------------------------------------------

def _as_tree(tree, seed):
    if isinstance(tree, LazyTree):
        return tree
    return LazyTree(tree, seed)


def _adjacent(arena, v):
    out = arena.children(v)
    p = arena.parent[v]
    if p >= 0:
        out.append(p)
    return out


def _distances(arena, src):
    dist = [-1] * arena.n
    dist[src] = 0
    queue = deque([src])
    while queue:
        v = queue.popleft()
        for w in _adjacent(arena, v):
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def _descendants(arena, v):
    out, stack = {v}, [v]
    while stack:
        for c in arena.children(stack.pop()):
            out.add(c)
            stack.append(c)
    return out


def _path(arena, a, b):
    def up(v):
        chain = [v]
        while arena.parent[v] >= 0:
            v = arena.parent[v]
            chain.append(v)
        return chain
    ua, ub = up(a), up(b)
    common = set(ua) & set(ub)
    if not common:
        raise EngineError("path endpoints are not connected in the realized tree")
    left = []
    for v in ua:
        left.append(v)
        if v in common:
            break
    right = []
    for v in ub:
        if v in common:
            break
        right.append(v)
    return left + right[::-1]


def _restriction_setup(tree, restriction):
    """Start vertex, kernel restriction code, anchor/arg and initial masks."""
    arena = tree.arena
    restriction = restriction or NoRestriction()
    n_known = arena.n

    def known(v):
        if not isinstance(v, int) or not 0 <= v < n_known:
            raise EngineError(f"restriction refers to unknown vertex {v!r}")

    if isinstance(restriction, NoRestriction):
        known(restriction.start)
        start, code, anchor, arg = restriction.start, C.R_NONE, -1, -1
    elif isinstance(restriction, Subtree):
        known(restriction.root)
        start, code, anchor, arg = restriction.root, C.R_SUBTREE, restriction.root, -1
    elif isinstance(restriction, SubtreePlusBranch):
        known(restriction.x)
        start, code, anchor, arg = restriction.x, C.R_SUBPLUS, restriction.x, -1
    elif isinstance(restriction, Ball):
        known(restriction.center)
        if restriction.radius < 0:
            raise EngineError("ball radius must be non-negative")
        start, code, anchor, arg = restriction.center, C.R_BALL, restriction.center, int(restriction.radius)
    elif isinstance(restriction, Path):
        known(restriction.src)
        known(restriction.dst)
        start, code, anchor, arg = restriction.src, C.R_PATH, restriction.src, -1
    else:
        raise EngineError(f"unknown restriction {restriction!r}")

    # the kernel realizes the start vertex's children on its first infection;
    # doing it here first lets the masks below cover them
    arena.realize_children(start)
    n = arena.n
    dist = _distances(arena, start)
    if code == C.R_NONE:
        allowed = [1] * n
    elif code == C.R_SUBTREE:
        sub = _descendants(arena, start)
        allowed = [1 if v in sub else 0 for v in range(n)]
    elif code == C.R_SUBPLUS:
        kids = arena.children(start)
        if not kids:
            raise EngineError("S+ branch needs a vertex with at least one child")
        child = kids[0] if restriction.child is None else restriction.child
        if child not in kids:
            raise EngineError("S+ branch child must be a child of x")
        sub = _descendants(arena, child)
        sub.add(start)
        allowed = [1 if v in sub else 0 for v in range(n)]
    elif code == C.R_BALL:
        allowed = [1 if 0 <= dist[v] <= arg else 0 for v in range(n)]
    else:
        on_path = set(_path(arena, restriction.src, restriction.dst))
        allowed = [1 if v in on_path else 0 for v in range(n)]
    return start, code, anchor, arg, allowed, dist


# -- process state -------------------------------------------------------

class ProcessState:
    """One (or several nested) contact processes on a lazily realized tree.

    ``lams`` holds one rate per level, sorted from high to low. Level 0 is
    the process reported by the single-level accessors.
    """

    def __init__(self, tree, lams, restriction=None, seed=0, check=False):
        lams = [float(x) for x in lams]
        if any(x < 0 for x in lams):
            raise EngineError("infection rates must be non-negative")
        if any(a < b for a, b in zip(lams, lams[1:])):
            raise EngineError("rates must be sorted from high to low")
        self.tree = tree
        self.lams = lams
        self.restriction = restriction or NoRestriction()
        self.seed = seed
        start, code, anchor, arg, allowed, dist = _restriction_setup(tree, self.restriction)
        self.start = start
        self.ladder = Ladder(tree.arena, lams, rng.factory(seed, rng.PROCESS), start,
                             allowed, dist, code, anchor, arg, bool(check))
        self._configured = False
        self._rhos = ()
        self._masks = False

    # single-level view
    @property
    def lam(self):
        return self.lams[0]

    @property
    def time(self):
        return self.ladder.t

    @property
    def event_count(self):
        return self.ladder.events

    def infected(self, level=0):
        return set(self.ladder.infected(level))

    def ever_infected(self, level=0):
        lad = self.ladder
        return {v for v in range(self.tree.arena.n) if lad.is_ever(v, level)}

    def frontier(self, level=0):
        lad, arena = self.ladder, self.tree.arena
        return {v for v in lad.infected(level)
                if lad.child_count_ever(v, level) < arena.nchild[v]}

    def accessible(self, level=0):
        """Never-infected children of infected frontier vertices."""
        lad, arena = self.ladder, self.tree.arena
        out = []
        for v in sorted(self.frontier(level)):
            out.extend(c for c in arena.children(v) if not lad.is_ever(c, level))
        return out

    def n_infected(self, level=0):
        return self.ladder.n_inf[level]

    def n_frontier(self, level=0):
        return self.ladder.n_front[level]

    @property
    def root_reinfections(self):
        return self.ladder.state()["reinf"][0]

    def is_allowed(self, v):
        return self.ladder.is_allowed(v)

    @property
    def violations(self):
        return self.ladder.violations


def init_process(tree, lam, restriction=None, seed=0, check=False):
    """Start a process with only the initial vertex infected at time 0."""
    if lam < 0:
        raise EngineError("lambda must be non-negative")
    return ProcessState(_as_tree(tree, seed), [lam], restriction, seed, check)


def next_event(state):
    """Advance by one event and describe it."""
    lad = state.ladder
    if lad.n_inf[0] == 0:
        raise EngineError("the process is extinct")
    code = lad.step()
    src = lad.last_src if code != C.EV_TIMECAP else None
    tgt = lad.last_tgt if code in (C.EV_INFECTION, C.EV_NOOP, C.EV_RECOVERY) else None
    return Event(C.EVENT_NAMES[code], lad.t, src, tgt)


def _configure(state, stop, epoch=None, rhos=(), doubling=False, masks=False):
    lad = state.ladder
    if state._configured:
        raise EngineError("a process state can only be run once")
    state._configured = True
    state._rhos = tuple(float(r) for r in rhos)
    for r in state._rhos:
        if not 0.0 < r < 1.0:
            raise EngineError("rho must lie in (0, 1)")
    lad.set_rhos(state._rhos)
    lad.set_stop(
        INF if stop.max_time is None else stop.max_time,
        1 << 62 if stop.max_infected is None else stop.max_infected,
        0 if stop.frontier_target is None else stop.frontier_target,
        0 if stop.max_events is None else stop.max_events,
    )
    targets = stop.targets()
    if targets:
        for v in targets:
            if not 0 <= v < state.tree.arena.n:
                raise EngineError(f"unknown target vertex {v!r}")
        lad.set_targets(list(targets))
    if stop.reinfection_target is not None:
        lad.set_reinfection(*stop.reinfection_target)
    if stop.root_reentries is not None:
        lad.set_reentry(stop.root_reentries)
    if epoch is not None:
        if not epoch > 0:
            raise EngineError("epoch length must be positive")
        lad.set_epochs(epoch)
    if doubling:
        lad.set_doubling()
    state._masks = bool(masks)
    lad.set_masks(state._masks)


def _epoch_rows(records, K, nrho, masks=False):
    width = 1 + K * (3 + nrho + (1 if masks else 0))
    rows = []
    for i in range(0, len(records), width):
        rows.append(records[i:i + width])
    return rows


def _outcomes(state, final_hist=True):
    lad = state.ladder
    st = lad.state()
    K = len(state.lams)
    nrho = len(state._rhos)
    extra = 1 if state._masks else 0
    rows = _epoch_rows(st["records"], K, nrho, state._masks)
    out = []
    for k in range(K):
        hist = None
        if final_hist and st["at"][k] == lad.t:
            hist = {}
            level = state.tree.arena.level
            for v in lad.infected(k):
                hist[level[v]] = hist.get(level[v], 0) + 1
            hist = dict(sorted(hist.items()))
        base = 1 + k * (3 + nrho + extra)
        epochs = [(r[0], int(r[base]), int(r[base + 1]), bool(r[base + 2]),
                   tuple(r[base + 3:base + 3 + nrho])) + ((int(r[base + 3 + nrho]),) if extra else ())
                  for r in rows]
        snap = Snapshot(st["snap_inf"][k], st["snap_front"][k],
                        dict(zip(state._rhos, st["snap_w"][k])), hist, epochs)
        out.append(Outcome(C.REASON_NAMES[st["reason"][k]], st["at"][k], snap))
    return out


def run(state, stop, epoch=None, rhos=(), doubling=False, masks=False):
    """Run until the stop condition; returns the Outcome of level 0.

    ``epoch`` records (t, |xi|, |frontier|, root infected, weights) at every
    multiple of the epoch length; ``rhos`` selects the weights reported and
    ``masks`` appends the infected set as a bitmask (trees under 53 vertices).
    """
    _configure(state, stop, epoch, rhos, doubling, masks)
    state.ladder.run()
    return _outcomes(state)[0]


def run_levels(state, stop, epoch=None, rhos=(), doubling=False):
    """Like :func:`run` but returns one Outcome per level."""
    _configure(state, stop, epoch, rhos, doubling)
    state.ladder.run()
    return _outcomes(state)


def tau_k(tree, lam, k, max_time, seed=0):
    """First time the infected frontier has at least k vertices (or censoring)."""
    if k < 1:
        raise EngineError("k must be >= 1")
    state = init_process(tree, lam, seed=seed)
    out = run(state, StopCondition(max_time=max_time, frontier_target=k))
    if out.reason == "FrontierReached":
        return Censored(out.at, out.reason)
    return Censored(None, out.reason)


@dataclass
class CouplingResult:
    high: Outcome
    low: Outcome
    first_discrepancy: float
    violations: int
    events: int


def coupled_run(tree, lam_high, lam_low, stop, seed=0, check=False, restriction=None):
    """Run two rates on one event stream; the low process is thinned by marks."""
    if lam_low > lam_high:
        raise EngineError("lambda_low must not exceed lambda_high")
    if lam_low < 0:
        raise EngineError("rates must be non-negative")
    tree = _as_tree(tree, seed)
    state = ProcessState(tree, [lam_high, lam_low], restriction, seed, check)
    high, low = run_levels(state, stop)
    d = state.ladder.state()["disc"][1]
    return CouplingResult(high, low, INF if d < 0 else d, state.violations, state.event_count)


def ladder_run(tree, lams, stop, seed=0, epoch=None, rhos=(), restriction=None, check=False):
    """Run a whole grid of rates on common randomness.

    The grid may be in any order; outcomes come back in the same order.
    """
    lams = [float(x) for x in lams]
    order = sorted(range(len(lams)), key=lambda i: -lams[i])
    tree = _as_tree(tree, seed)
    state = ProcessState(tree, [lams[i] for i in order], restriction, seed, check)
    outs = run_levels(state, stop, epoch, rhos)
    result = [None] * len(lams)
    for pos, i in enumerate(order):
        result[i] = outs[pos]
    return result, state


def weight_of_state(state, rho, level=0):
    """Sum of rho**level(x) over the infected vertices."""
    if not 0.0 < rho < 1.0:
        raise EngineError("rho must lie in (0, 1)")
    lvl = state.tree.arena.level
    return math.fsum(rho ** lvl[v] for v in state.ladder.infected(level))


@dataclass
class Recurrence:
    times: list
    censored: bool
    reason: str


def recurrence_times(tree, x, lam, m, gap, max_time, seed=0, branch_child=None, max_infected=None):
    """Successive visits of x by the process restricted to its S+ branch.

    ``times[i]`` is the first time after ``times[i-1] + gap`` (after ``gap``
    for the first one) at which x is infected. ``max_infected`` stops
    supercritical runs early; the result is then censored with reason MassCap.
    """
    if gap < 0:
        raise EngineError("gap must be non-negative")
    tree = _as_tree(tree, seed)
    state = init_process(tree, lam, SubtreePlusBranch(x, branch_child), seed)
    out = run(state, StopCondition(max_time=max_time, max_infected=max_infected, reinfection_target=(m, gap)))
    times = list(state.ladder.state()["sig"][0])
    return Recurrence(times, len(times) < m, out.reason)


def frontier_from_scratch(state, level=0):
    """Recompute xi ∩ F(A) directly from the definition (used by checks)."""
    arena = state.tree.arena
    ever = state.ever_infected(level)
    out = set()
    for v in state.infected(level):
        for c in arena.children(v):
            sub = _descendants(arena, c)
            if not (sub & ever):
                out.add(v)
                break
    if arena.nchild and any(arena.nchild[v] < 0 for v in state.infected(level)):
        raise AssertionError("infected vertex with unrealized children")
    return out
