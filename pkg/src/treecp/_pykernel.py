"""Pure-Python event kernel.

This is the fallback used when the compiled ``_ckernel`` extension is not
available, and the reference the extension is checked against. Both consume
their uniform streams in exactly the same order, so a given seed produces
bit-identical trajectories on either backend.

Vertices live in an append-only :class:`Arena`. A vertex's children are
created in one contiguous block the first time they are needed; on periodic
trees the apex may also grow a parent. :class:`Ladder` runs K nested contact
processes with rates ``lams[0] >= lams[1] >= ...`` on one arena, driven by a
single event stream: events are proposed at the top rate and an infection
arrow carries a uniform mark that level k accepts iff
``mark < lams[k] / lams[0]``.
"""
import math
from bisect import bisect_right

from ._codes import (
    EV_EXTINCT, EV_INFECTION, EV_NOOP, EV_RECOVERY, EV_SUPPRESSED, EV_TIMECAP,
    EVENTCAP, EXTINCT, FIXED, FRONTIER, GWPLUS, MASSCAP, MAX_CHUNK, MIN_CHUNK,
    PERIODIC, R_BALL, R_NONE, R_SUBPLUS, R_SUBTREE, REINFECTION, RUNNING,
    TARGET, TIMECAP,
)

BACKEND = "python"


class Arena:
    """Append-only vertex store for one lazily realized tree.

    ``gen_factory`` is called (once, on first need) to obtain the numpy
    Generator feeding the structure stream. Deterministic topologies never
    call it.
    """

    def __init__(self, kind, gen_factory, cdf=(), vals=(), periods=(),
                 root_type=0, fixed_counts=()):
        self.kind = kind
        self._gen_factory = gen_factory
        self._gen = None
        self._buf = []
        self._pos = 0
        self._chunk = MIN_CHUNK
        self.cdf = [float(c) for c in cdf]
        self.vals = [int(v) for v in vals]
        self.periods = [int(a) for a in periods]
        self.kappa = len(self.periods)
        self.parent = []
        self.level = []
        self.depth = []
        self.ptype = []
        self.nchild = []
        self.first_child = []
        self.up_child = []
        self.n = 0
        self.max_deg = 0
        self.apex = 0
        self.draws = 0
        if kind == FIXED:
            self._build_fixed([int(c) for c in fixed_counts])
        else:
            self._new(-1, 0, 0, root_type if kind == PERIODIC else 0)

    def _new(self, parent, level, depth, ptype):
        self.parent.append(parent)
        self.level.append(level)
        self.depth.append(depth)
        self.ptype.append(ptype)
        self.nchild.append(-1)
        self.first_child.append(-1)
        self.up_child.append(-1)
        self.n += 1
        return self.n - 1

    def _build_fixed(self, counts):
        nxt = 1
        self._new(-1, 0, 0, 0)
        for i in range(len(counts)):
            self.first_child[i] = nxt
            self.nchild[i] = counts[i]
            for _ in range(counts[i]):
                self._new(i, self.level[i] + 1, self.depth[i] + 1, 0)
                nxt += 1
            deg = counts[i] + (1 if self.parent[i] >= 0 else 0)
            if deg > self.max_deg:
                self.max_deg = deg
        if self.n != len(counts):
            raise ValueError("child counts do not describe a tree in BFS order")

    def uniform(self):
        if self._pos == len(self._buf):
            if self._gen is None:
                self._gen = self._gen_factory()
            self._buf = self._gen.random(self._chunk).tolist()
            self._pos = 0
            if self._chunk < MAX_CHUNK:
                self._chunk *= 2
        u = self._buf[self._pos]
        self._pos += 1
        self.draws += 1
        return u

    def has_parent(self, v):
        return self.kind == PERIODIC or self.parent[v] >= 0

    def degree(self, v):
        return self.nchild[v] + (1 if self.has_parent(v) else 0)

    def child(self, v, i):
        up = self.up_child[v]
        if up >= 0:
            return up if i == 0 else self.first_child[v] + i - 1
        return self.first_child[v] + i

    def realize_children(self, v):
        if self.nchild[v] >= 0:
            return
        kind = self.kind
        if kind == PERIODIC:
            c = self.periods[self.ptype[v]]
        elif kind == GWPLUS and v == 0:
            c = 1
        else:
            c = self.vals[bisect_right(self.cdf, self.uniform())]
        extra = 1 if self.up_child[v] >= 0 else 0
        first = self.n
        lvl = self.level[v] + 1
        dep = self.depth[v] + 1
        typ = (self.ptype[v] + 1) % self.kappa if kind == PERIODIC else 0
        for _ in range(c - extra):
            self._new(v, lvl, dep, typ)
        self.first_child[v] = first
        self.nchild[v] = c
        deg = c + (1 if self.has_parent(v) else 0)
        if deg > self.max_deg:
            self.max_deg = deg

    def realize_parent(self, v):
        if self.kind != PERIODIC:
            raise ValueError("upward growth unsupported on this topology")
        if self.parent[v] >= 0 or v != self.apex:
            raise ValueError("vertex %d is not the apex" % v)
        p = self._new(-1, self.level[v] - 1, self.depth[v] + 1,
                      (self.ptype[v] - 1) % self.kappa)
        self.up_child[p] = v
        self.parent[v] = p
        self.apex = p
        return p

    def children(self, v):
        c = self.nchild[v]
        if c < 0:
            return []
        return [self.child(v, i) for i in range(c)]

    def vertex(self, v):
        if not 0 <= v < self.n:
            raise KeyError("unknown vertex %r" % (v,))
        return (self.parent[v], self.level[v], self.depth[v], self.ptype[v],
                self.nchild[v])


class Ladder:
    """K nested contact processes sharing one arena and one event stream."""

    def __init__(self, arena, lams, gen_factory, start, allowed0, dist0,
                 rkind=R_NONE, ranchor=-1, rarg=-1, check=False):
        K = len(lams)
        if K < 1:
            raise ValueError("need at least one rate")
        self.arena = arena
        self.K = K
        self.lams = [float(x) for x in lams]
        self.lam0 = self.lams[0]
        self.ratio = [(x / self.lam0 if self.lam0 > 0 else 0.0) for x in self.lams]
        self._gen_factory = gen_factory
        self._gen = None
        self._buf = []
        self._pos = 0
        self._chunk = MIN_CHUNK
        self.draws = 0
        self.rkind = rkind
        self.ranchor = ranchor
        self.rarg = rarg
        self.check = bool(check)
        self.violations = 0

        self.inf = []
        self.ever = []
        self.cnt = []
        self.ipos = []
        self.tgt = []
        self.allowed = []
        self.dist = []
        self.ilist = []
        self.nk = 0
        n0 = arena.n
        for v in range(n0):
            self.inf.extend([0] * K)
            self.ever.extend([0] * K)
            self.cnt.extend([0] * K)
            self.ipos.append(-1)
            self.tgt.append(-1)
            self.allowed.append(1 if allowed0[v] else 0)
            self.dist.append(int(dist0[v]))
        self.nk = n0

        self.n_inf = [0] * K
        self.n_front = [0] * K
        self.n_ever = [0] * K
        self.t = 0.0
        self.events = 0
        self.x0 = start
        self.left = [0] * K
        self.reinf = [[] for _ in range(K)]
        self.exits = [[] for _ in range(K)]

        self.active = [1] * K
        self.n_active = K
        self.reason = [RUNNING] * K
        self.at = [0.0] * K
        self.snap_inf = [0] * K
        self.snap_front = [0] * K
        self.snap_w = [[] for _ in range(K)]

        self.max_time = math.inf
        self.max_inf = 1 << 62
        self.ftarget = 0
        self.max_events = 0
        self.ntargets = 0
        self.hit = []
        self.n_hit = [0] * K
        self.sig_m = 0
        self.reentry = 0
        self.gap = 0.0
        self.sig = [[] for _ in range(K)]
        self.thr = [0.0] * K
        self.ep_len = 0.0
        self.ep_idx = 0
        self.next_ep = math.inf
        self.records = []
        self.masks = False
        self.rhos = []
        self.dbl = False
        self.dthr = [2] * K
        self.dtimes = [[] for _ in range(K)]
        self.disc = [-1.0] * K

        self.last_src = -1
        self.last_tgt = -1

        for k in range(K):
            self._infect(start, k)

    # -- streams ---------------------------------------------------------
    def _u(self):
        if self._pos == len(self._buf):
            if self._gen is None:
                self._gen = self._gen_factory()
            self._buf = self._gen.random(self._chunk).tolist()
            self._pos = 0
            if self._chunk < MAX_CHUNK:
                self._chunk *= 2
        u = self._buf[self._pos]
        self._pos += 1
        self.draws += 1
        return u

    # -- configuration ---------------------------------------------------
    def set_stop(self, max_time, max_inf, ftarget, max_events):
        self.max_time = float(max_time)
        self.max_inf = int(max_inf)
        self.ftarget = int(ftarget)
        self.max_events = int(max_events)

    def set_rhos(self, rhos):
        self.rhos = [float(r) for r in rhos]

    def set_targets(self, targets):
        K = self.K
        self.ntargets = len(targets)
        self.hit = [-1.0] * (self.ntargets * K)
        self.n_hit = [0] * K
        for i, v in enumerate(targets):
            self.tgt[v] = i
            for k in range(K):
                if self.inf[v * K + k]:
                    self.hit[i * K + k] = self.t
                    self.n_hit[k] += 1

    def set_reinfection(self, m, gap):
        K = self.K
        self.sig_m = int(m)
        self.gap = float(gap)
        for k in range(K):
            self.sig[k] = []
            self.thr[k] = self.t + self.gap

    def set_reentry(self, count):
        self.reentry = int(count)

    def set_epochs(self, length):
        self.ep_len = float(length)
        self.ep_idx = 0
        self.next_ep = 0.0

    def set_masks(self, flag):
        # bitmask of the infected set in every epoch record (small trees only)
        self.masks = bool(flag)

    def set_doubling(self):
        self.dbl = True
        for k in range(self.K):
            self.dthr[k] = 2
            while self.n_inf[k] >= self.dthr[k]:
                self.dtimes[k].append(self.t)
                self.dthr[k] *= 2

    # -- bookkeeping -----------------------------------------------------
    def _sync(self):
        arena = self.arena
        K = self.K
        rkind = self.rkind
        while self.nk < arena.n:
            v = self.nk
            self.inf.extend([0] * K)
            self.ever.extend([0] * K)
            self.cnt.extend([0] * K)
            self.ipos.append(-1)
            self.tgt.append(-1)
            up = arena.up_child[v]
            if up >= 0:
                for k in range(K):
                    self.cnt[v * K + k] = self.ever[up * K + k]
                d = self.dist[up] + 1
                if rkind == R_NONE:
                    a = 1
                elif rkind == R_BALL:
                    a = 1 if d <= self.rarg else 0
                else:
                    a = 0
            else:
                p = arena.parent[v]
                d = self.dist[p] + 1
                if rkind == R_NONE:
                    a = 1
                elif rkind == R_SUBTREE:
                    a = self.allowed[p]
                elif rkind == R_SUBPLUS:
                    a = self.allowed[p] if p != self.ranchor else 0
                elif rkind == R_BALL:
                    a = 1 if d <= self.rarg else 0
                else:
                    a = 0
            self.allowed.append(a)
            self.dist.append(d)
            self.nk += 1

    def _weights(self, k):
        K = self.K
        level = self.arena.level
        out = []
        for rho in self.rhos:
            w = 0.0
            for v in self.ilist:
                if self.inf[v * K + k]:
                    w += rho ** level[v]
            out.append(w)
        return out

    def _freeze(self, k, reason, at):
        self.active[k] = 0
        self.n_active -= 1
        self.reason[k] = reason
        self.at[k] = at
        self.snap_inf[k] = self.n_inf[k]
        self.snap_front[k] = self.n_front[k]
        self.snap_w[k] = self._weights(k)

    def _record_epoch(self, when):
        K = self.K
        rec = self.records
        rec.append(when)
        xb = self.x0 * K
        for k in range(K):
            rec.append(float(self.n_inf[k]))
            rec.append(float(self.n_front[k]))
            rec.append(float(self.inf[xb + k]))
            rec.extend(self._weights(k))
            if self.masks:
                m = 0.0
                for v in self.ilist:
                    if self.inf[v * K + k]:
                        m += float(1 << v)
                rec.append(m)

    def _infect(self, y, k):
        arena = self.arena
        K = self.K
        yb = y * K + k
        if not self.ever[yb]:
            if k == 0:
                arena.realize_children(y)
                self._sync()
            self.ever[yb] = 1
            self.n_ever[k] += 1
            p = arena.parent[y]
            if p >= 0:
                pb = p * K + k
                self.cnt[pb] += 1
                if self.inf[pb] and self.cnt[pb] == arena.nchild[p]:
                    self.n_front[k] -= 1
        self.inf[yb] = 1
        self.n_inf[k] += 1
        if self.cnt[yb] < arena.nchild[y]:
            self.n_front[k] += 1
        if k == 0:
            self.ipos[y] = len(self.ilist)
            self.ilist.append(y)
        if y == self.x0 and self.left[k]:
            self.reinf[k].append(self.t)
        ti = self.tgt[y]
        if ti >= 0 and self.hit[ti * K + k] < 0.0:
            self.hit[ti * K + k] = self.t
            self.n_hit[k] += 1
        if self.dbl:
            while self.n_inf[k] >= self.dthr[k]:
                self.dtimes[k].append(self.t)
                self.dthr[k] *= 2
        if self.active[k]:
            if self.ftarget > 0 and self.n_front[k] >= self.ftarget:
                self._freeze(k, FRONTIER, self.t)
            elif self.ntargets > 0 and self.n_hit[k] == self.ntargets:
                self._freeze(k, TARGET, self.t)
            elif 0 < self.reentry <= len(self.reinf[k]):
                self._freeze(k, REINFECTION, self.t)
            elif self.n_inf[k] >= self.max_inf:
                self._freeze(k, MASSCAP, self.t)

    def _recover(self, x):
        arena = self.arena
        K = self.K
        xb = x * K
        for k in range(K):
            if self.inf[xb + k]:
                self.inf[xb + k] = 0
                self.n_inf[k] -= 1
                if self.cnt[xb + k] < arena.nchild[x]:
                    self.n_front[k] -= 1
                if x == self.x0:
                    self.left[k] = 1
                    self.exits[k].append(self.t)
                if self.active[k] and self.n_inf[k] == 0:
                    self._freeze(k, EXTINCT, self.t)
        i = self.ipos[x]
        last = self.ilist.pop()
        if last != x:
            self.ilist[i] = last
            self.ipos[last] = i
        self.ipos[x] = -1

    def _interval(self, t_end, inclusive):
        # the state is constant on [self.t, t_end)
        if self.ep_len > 0.0:
            while self.next_ep < t_end or (inclusive and self.next_ep <= t_end):
                self._record_epoch(self.next_ep)
                self.ep_idx += 1
                self.next_ep = self.ep_idx * self.ep_len
        if self.sig_m > 0:
            K = self.K
            xb = self.x0 * K
            for k in range(K):
                if self.active[k] and self.inf[xb + k]:
                    while self.thr[k] < t_end or (inclusive and self.thr[k] <= t_end):
                        s = self.thr[k] if self.thr[k] > self.t else self.t
                        self.sig[k].append(s)
                        self.thr[k] = s + self.gap
                        if len(self.sig[k]) >= self.sig_m:
                            self._freeze(k, REINFECTION, s)
                            break

    def _target(self, x, j, hp):
        arena = self.arena
        if hp and j == 0:
            p = arena.parent[x]
            if p < 0:
                if self.rkind == R_NONE:
                    pass
                elif self.rkind == R_BALL and self.dist[x] + 1 <= self.rarg:
                    pass
                else:
                    return -1
                p = arena.realize_parent(x)
                self._sync()
            return p if self.allowed[p] else -1
        c = arena.child(x, j - hp)
        return c if self.allowed[c] else -1

    def _check(self):
        K = self.K
        inf = self.inf
        for k in range(1, K):
            c = 0
            for v in self.ilist:
                a = inf[v * K + k]
                if a > inf[v * K + k - 1]:
                    self.violations += 1
                c += a
            if c != self.n_inf[k]:
                self.violations += 1

    def _event(self):
        arena = self.arena
        K = self.K
        while True:
            n = self.n_inf[0]
            if n == 0:
                return EV_EXTINCT
            bound = 1.0 + self.lam0 * arena.max_deg
            t_new = self.t - math.log1p(-self._u()) / (n * bound)
            if t_new > self.max_time:
                self._interval(self.max_time, True)
                self.t = self.max_time
                return EV_TIMECAP
            self._interval(t_new, False)
            self.t = t_new
            x = self.ilist[int(self._u() * n)]
            s = self._u() * bound
            self.last_src = x
            if s < 1.0:
                self.last_tgt = x
                self.events += 1
                self._recover(x)
                return EV_RECOVERY
            j = int((s - 1.0) / self.lam0)
            if j >= arena.max_deg:
                j = arena.max_deg - 1
            hp = 1 if (arena.kind == PERIODIC or arena.parent[x] >= 0) else 0
            if j >= arena.nchild[x] + hp:
                continue
            mark = self._u() if K > 1 else 0.0
            self.events += 1
            y = self._target(x, j, hp)
            self.last_tgt = y
            if y < 0:
                return EV_SUPPRESSED
            xb = x * K
            yb = y * K
            changed = False
            for k in range(K):
                if self.inf[xb + k] and not self.inf[yb + k] and (k == 0 or mark < self.ratio[k]):
                    self._infect(y, k)
                    changed = True
            return EV_INFECTION if changed else EV_NOOP

    def _post(self):
        K = self.K
        for k in range(1, K):
            if self.disc[k] < 0.0 and self.n_inf[k] != self.n_inf[k - 1]:
                self.disc[k] = self.t
        if self.check:
            self._check()
        if self.max_events > 0 and self.events >= self.max_events:
            for k in range(K):
                if self.active[k]:
                    self._freeze(k, EVENTCAP, self.t)

    def step(self):
        """Apply one real event and return its EV_* code."""
        code = self._event()
        if code == EV_TIMECAP:
            for k in range(self.K):
                if self.active[k]:
                    self._freeze(k, TIMECAP, self.t)
        elif code != EV_EXTINCT:
            self._post()
        return code

    def precheck(self):
        K = self.K
        self._interval(self.t, True)
        for k in range(K):
            if not self.active[k]:
                continue
            if self.n_inf[k] == 0:
                self._freeze(k, EXTINCT, self.t)
            elif self.ftarget > 0 and self.n_front[k] >= self.ftarget:
                self._freeze(k, FRONTIER, self.t)
            elif self.ntargets > 0 and self.n_hit[k] == self.ntargets:
                self._freeze(k, TARGET, self.t)
            elif self.sig_m > 0 and len(self.sig[k]) >= self.sig_m:
                self._freeze(k, REINFECTION, self.sig[k][self.sig_m - 1])
            elif self.n_inf[k] >= self.max_inf:
                self._freeze(k, MASSCAP, self.t)
            elif self.t >= self.max_time:
                self._freeze(k, TIMECAP, self.t)
            elif self.max_events > 0 and self.events >= self.max_events:
                self._freeze(k, EVENTCAP, self.t)

    def run(self):
        self.precheck()
        while self.n_active > 0:
            self.step()

    def advance(self, t_end):
        """Keep evolving (frozen levels included) up to time t_end."""
        self.max_time = float(t_end)
        while True:
            code = self.step()
            if code == EV_TIMECAP or code == EV_EXTINCT:
                return code

    # -- accessors -------------------------------------------------------
    def infected(self, k):
        K = self.K
        return [v for v in self.ilist if self.inf[v * K + k]]

    def is_infected(self, v, k):
        return bool(self.inf[v * self.K + k])

    def is_ever(self, v, k):
        return bool(self.ever[v * self.K + k])

    def child_count_ever(self, v, k):
        return self.cnt[v * self.K + k]

    def is_allowed(self, v):
        return bool(self.allowed[v])

    def hit_time(self, i, k):
        return self.hit[i * self.K + k]

    def weights(self, k):
        return self._weights(k)

    def get_records(self):
        return list(self.records)

    def state(self):
        """Plain-Python copy of the per-level scalar state."""
        return {
            "t": self.t,
            "events": self.events,
            "n_inf": list(self.n_inf),
            "n_front": list(self.n_front),
            "n_ever": list(self.n_ever),
            "reason": list(self.reason),
            "at": list(self.at),
            "snap_inf": list(self.snap_inf),
            "snap_front": list(self.snap_front),
            "snap_w": [list(w) for w in self.snap_w],
            "reinf": [list(r) for r in self.reinf],
            "exits": [list(r) for r in self.exits],
            "sig": [list(s) for s in self.sig],
            "disc": list(self.disc),
            "dtimes": [list(d) for d in self.dtimes],
            "records": list(self.records),
            "violations": self.violations,
            "draws": self.draws,
        }
