# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event kernel.

A line-for-line port of ``_pykernel``: same vertex layout, same order of
uniform draws, same floating point operations. Any change here must be
mirrored there (tests/test_backends.py compares them bit for bit).
"""
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memset
from libc.math cimport log1p, pow, ldexp, INFINITY

BACKEND = "cython"

cdef enum:
    K_GW = 0
    K_GWPLUS = 1
    K_PERIODIC = 2
    K_FIXED = 3
    R_NONE = 0
    R_SUBTREE = 1
    R_SUBPLUS = 2
    R_BALL = 3
    R_PATH = 4
    RUNNING = 0
    EXTINCT = 1
    TIMECAP = 2
    MASSCAP = 3
    FRONTIER = 4
    TARGET = 5
    REINFECTION = 6
    EVENTCAP = 7
    EV_EXTINCT = 0
    EV_RECOVERY = 1
    EV_INFECTION = 2
    EV_NOOP = 3
    EV_SUPPRESSED = 4
    EV_TIMECAP = 5
    MIN_CHUNK = 64
    MAX_CHUNK = 65536

CODES = {
    "GW": K_GW, "GWPLUS": K_GWPLUS, "PERIODIC": K_PERIODIC, "FIXED": K_FIXED,
    "R_NONE": R_NONE, "R_SUBTREE": R_SUBTREE, "R_SUBPLUS": R_SUBPLUS,
    "R_BALL": R_BALL, "R_PATH": R_PATH,
    "RUNNING": RUNNING, "EXTINCT": EXTINCT, "TIMECAP": TIMECAP, "MASSCAP": MASSCAP,
    "FRONTIER": FRONTIER, "TARGET": TARGET, "REINFECTION": REINFECTION,
    "EVENTCAP": EVENTCAP,
    "EV_EXTINCT": EV_EXTINCT, "EV_RECOVERY": EV_RECOVERY, "EV_INFECTION": EV_INFECTION,
    "EV_NOOP": EV_NOOP, "EV_SUPPRESSED": EV_SUPPRESSED, "EV_TIMECAP": EV_TIMECAP,
    "MIN_CHUNK": MIN_CHUNK, "MAX_CHUNK": MAX_CHUNK,
}


cdef void* _grow(void* p, size_t nbytes) except NULL:
    cdef void* q = realloc(p, nbytes)
    if q == NULL:
        raise MemoryError()
    return q


cdef class IntView:
    """Read-only indexable window onto one of the arena's int arrays."""
    cdef object owner
    cdef int which

    def __len__(self):
        return (<Arena>self.owner).n

    def __getitem__(self, Py_ssize_t i):
        cdef Arena a = <Arena>self.owner
        if i < 0:
            i += a.n
        if i < 0 or i >= a.n:
            raise IndexError(i)
        if self.which == 0:
            return a._parent[i]
        if self.which == 1:
            return a._level[i]
        if self.which == 2:
            return a._depth[i]
        if self.which == 3:
            return a._ptype[i]
        if self.which == 4:
            return a._nchild[i]
        if self.which == 5:
            return a._first[i]
        return a._up[i]

    def __iter__(self):
        cdef Py_ssize_t i
        for i in range(len(self)):
            yield self[i]


cdef IntView _view(Arena a, int which):
    cdef IntView v = IntView.__new__(IntView)
    v.owner = a
    v.which = which
    return v


cdef class Arena:
    cdef public int kind
    cdef public int n
    cdef public int max_deg
    cdef public int apex
    cdef public int kappa
    cdef public long long draws
    cdef int cap
    cdef int* _parent
    cdef int* _level
    cdef int* _depth
    cdef int* _ptype
    cdef int* _nchild
    cdef int* _first
    cdef int* _up
    cdef double* _cdf
    cdef int* _vals
    cdef int ncdf
    cdef int* _periods
    cdef object gen_factory
    cdef object gen
    cdef double[::1] buf
    cdef Py_ssize_t pos
    cdef Py_ssize_t blen
    cdef Py_ssize_t chunk

    def __cinit__(self):
        self.cap = 0
        self._parent = NULL
        self._level = NULL
        self._depth = NULL
        self._ptype = NULL
        self._nchild = NULL
        self._first = NULL
        self._up = NULL
        self._cdf = NULL
        self._vals = NULL
        self._periods = NULL

    def __dealloc__(self):
        free(self._parent)
        free(self._level)
        free(self._depth)
        free(self._ptype)
        free(self._nchild)
        free(self._first)
        free(self._up)
        free(self._cdf)
        free(self._vals)
        free(self._periods)

    def __init__(self, int kind, gen_factory, cdf=(), vals=(), periods=(),
                 int root_type=0, fixed_counts=()):
        cdef int i
        self.kind = kind
        self.gen_factory = gen_factory
        self.gen = None
        self.pos = 0
        self.blen = 0
        self.chunk = MIN_CHUNK
        self.draws = 0
        self.n = 0
        self.max_deg = 0
        self.apex = 0
        self.ncdf = len(cdf)
        if self.ncdf:
            self._cdf = <double*>_grow(NULL, self.ncdf * sizeof(double))
            self._vals = <int*>_grow(NULL, self.ncdf * sizeof(int))
            for i in range(self.ncdf):
                self._cdf[i] = cdf[i]
                self._vals[i] = vals[i]
        self.kappa = len(periods)
        if self.kappa:
            self._periods = <int*>_grow(NULL, self.kappa * sizeof(int))
            for i in range(self.kappa):
                self._periods[i] = periods[i]
        self._reserve(64)
        if kind == K_FIXED:
            self._build_fixed(list(fixed_counts))
        else:
            self._new(-1, 0, 0, root_type if kind == K_PERIODIC else 0)

    cdef int _reserve(self, int need) except -1:
        cdef int cap = self.cap
        if need <= cap:
            return 0
        if cap == 0:
            cap = 64
        while cap < need:
            cap *= 2
        self._parent = <int*>_grow(self._parent, cap * sizeof(int))
        self._level = <int*>_grow(self._level, cap * sizeof(int))
        self._depth = <int*>_grow(self._depth, cap * sizeof(int))
        self._ptype = <int*>_grow(self._ptype, cap * sizeof(int))
        self._nchild = <int*>_grow(self._nchild, cap * sizeof(int))
        self._first = <int*>_grow(self._first, cap * sizeof(int))
        self._up = <int*>_grow(self._up, cap * sizeof(int))
        self.cap = cap
        return 0

    cdef int _new(self, int parent, int level, int depth, int ptype) except -1:
        cdef int v = self.n
        if v >= self.cap:
            self._reserve(v + 1)
        self._parent[v] = parent
        self._level[v] = level
        self._depth[v] = depth
        self._ptype[v] = ptype
        self._nchild[v] = -1
        self._first[v] = -1
        self._up[v] = -1
        self.n = v + 1
        return v

    cdef int _build_fixed(self, list counts) except -1:
        cdef int i, j, c, deg
        cdef int m = len(counts)
        self._new(-1, 0, 0, 0)
        for i in range(m):
            c = counts[i]
            self._first[i] = self.n
            self._nchild[i] = c
            for j in range(c):
                self._new(i, self._level[i] + 1, self._depth[i] + 1, 0)
            deg = c + (1 if self._parent[i] >= 0 else 0)
            if deg > self.max_deg:
                self.max_deg = deg
        if self.n != m:
            raise ValueError("child counts do not describe a tree in BFS order")
        return 0

    cdef double _uniform(self) except? -1.0:
        cdef double u
        if self.pos == self.blen:
            if self.gen is None:
                self.gen = self.gen_factory()
            self.buf = self.gen.random(self.chunk)
            self.blen = self.chunk
            self.pos = 0
            if self.chunk < MAX_CHUNK:
                self.chunk *= 2
        u = self.buf[self.pos]
        self.pos += 1
        self.draws += 1
        return u

    def uniform(self):
        return self._uniform()

    cdef inline int _has_parent(self, int v) noexcept:
        return self.kind == K_PERIODIC or self._parent[v] >= 0

    def has_parent(self, int v):
        return bool(self._has_parent(v))

    def degree(self, int v):
        return self._nchild[v] + self._has_parent(v)

    cdef inline int _child(self, int v, int i) noexcept:
        cdef int up = self._up[v]
        if up >= 0:
            return up if i == 0 else self._first[v] + i - 1
        return self._first[v] + i

    def child(self, int v, int i):
        return self._child(v, i)

    cdef int _realize_children(self, int v) except -1:
        cdef int c, extra, first, lvl, dep, typ, j, deg, lo, hi, mid
        cdef double u
        if self._nchild[v] >= 0:
            return 0
        if self.kind == K_PERIODIC:
            c = self._periods[self._ptype[v]]
        elif self.kind == K_GWPLUS and v == 0:
            c = 1
        else:
            u = self._uniform()
            # first index with cdf > u
            lo = 0
            hi = self.ncdf
            while lo < hi:
                mid = (lo + hi) >> 1
                if u < self._cdf[mid]:
                    hi = mid
                else:
                    lo = mid + 1
            c = self._vals[lo]
        extra = 1 if self._up[v] >= 0 else 0
        first = self.n
        lvl = self._level[v] + 1
        dep = self._depth[v] + 1
        typ = (self._ptype[v] + 1) % self.kappa if self.kind == K_PERIODIC else 0
        self._reserve(self.n + c)
        for j in range(c - extra):
            self._new(v, lvl, dep, typ)
        self._first[v] = first
        self._nchild[v] = c
        deg = c + self._has_parent(v)
        if deg > self.max_deg:
            self.max_deg = deg
        return 0

    def realize_children(self, int v):
        self._realize_children(v)

    cdef int _realize_parent(self, int v) except -1:
        cdef int p
        if self.kind != K_PERIODIC:
            raise ValueError("upward growth unsupported on this topology")
        if self._parent[v] >= 0 or v != self.apex:
            raise ValueError("vertex %d is not the apex" % v)
        p = self._new(-1, self._level[v] - 1, self._depth[v] + 1,
                      (self._ptype[v] - 1 + self.kappa) % self.kappa)
        self._up[p] = v
        self._parent[v] = p
        self.apex = p
        return p

    def realize_parent(self, int v):
        return self._realize_parent(v)

    def children(self, int v):
        cdef int c = self._nchild[v]
        cdef int i
        if c < 0:
            return []
        return [self._child(v, i) for i in range(c)]

    def vertex(self, v):
        if not 0 <= v < self.n:
            raise KeyError("unknown vertex %r" % (v,))
        return (self._parent[v], self._level[v], self._depth[v], self._ptype[v],
                self._nchild[v])

    @property
    def parent(self):
        return _view(self, 0)

    @property
    def level(self):
        return _view(self, 1)

    @property
    def depth(self):
        return _view(self, 2)

    @property
    def ptype(self):
        return _view(self, 3)

    @property
    def nchild(self):
        return _view(self, 4)

    @property
    def first_child(self):
        return _view(self, 5)

    @property
    def up_child(self):
        return _view(self, 6)

    @property
    def periods(self):
        return [self._periods[i] for i in range(self.kappa)]


cdef class Ladder:
    cdef Arena arena
    cdef public int K
    cdef double lam0
    cdef double* ratio
    cdef object lams_py
    cdef object gen_factory
    cdef object gen
    cdef double[::1] buf
    cdef Py_ssize_t pos
    cdef Py_ssize_t blen
    cdef Py_ssize_t chunk
    cdef public long long draws
    cdef int rkind
    cdef int ranchor
    cdef int rarg
    cdef int check
    cdef public long long violations

    cdef char* _inf
    cdef char* _ever
    cdef int* _cnt
    cdef int* _ipos
    cdef int* _tgt
    cdef char* _allowed
    cdef int* _dist
    cdef int* _ilist
    cdef int nil
    cdef int ilcap
    cdef int nk
    cdef int vcap

    cdef long long* _n_inf
    cdef long long* _n_front
    cdef long long* _n_ever
    cdef public double t
    cdef public long long events
    cdef public int x0
    cdef char* _left
    cdef list reinf
    cdef list exits

    cdef char* _active
    cdef public int n_active
    cdef int* _reason
    cdef double* _at
    cdef long long* _snap_inf
    cdef long long* _snap_front
    cdef list snap_w

    cdef double max_time
    cdef long long max_inf
    cdef long long ftarget
    cdef long long max_events
    cdef int ntargets
    cdef double* _hit
    cdef int* _n_hit
    cdef int sig_m
    cdef int reentry
    cdef double gap
    cdef list sig
    cdef double* _thr
    cdef double ep_len
    cdef long long ep_idx
    cdef double next_ep
    cdef list records
    cdef int masks
    cdef double* _rhos
    cdef int nrho
    cdef int dbl
    cdef long long* _dthr
    cdef list dtimes
    cdef double* _disc

    cdef public int last_src
    cdef public int last_tgt

    def __cinit__(self):
        self.ratio = NULL
        self._inf = NULL
        self._ever = NULL
        self._cnt = NULL
        self._ipos = NULL
        self._tgt = NULL
        self._allowed = NULL
        self._dist = NULL
        self._ilist = NULL
        self._n_inf = NULL
        self._n_front = NULL
        self._n_ever = NULL
        self._left = NULL
        self._active = NULL
        self._reason = NULL
        self._at = NULL
        self._snap_inf = NULL
        self._snap_front = NULL
        self._hit = NULL
        self._n_hit = NULL
        self._thr = NULL
        self._rhos = NULL
        self._dthr = NULL
        self._disc = NULL

    def __dealloc__(self):
        free(self.ratio)
        free(self._inf)
        free(self._ever)
        free(self._cnt)
        free(self._ipos)
        free(self._tgt)
        free(self._allowed)
        free(self._dist)
        free(self._ilist)
        free(self._n_inf)
        free(self._n_front)
        free(self._n_ever)
        free(self._left)
        free(self._active)
        free(self._reason)
        free(self._at)
        free(self._snap_inf)
        free(self._snap_front)
        free(self._hit)
        free(self._n_hit)
        free(self._thr)
        free(self._rhos)
        free(self._dthr)
        free(self._disc)

    def __init__(self, Arena arena, lams, gen_factory, int start, allowed0, dist0,
                 int rkind=R_NONE, int ranchor=-1, int rarg=-1, check=False):
        cdef int K = len(lams)
        cdef int k, v, n0
        if K < 1:
            raise ValueError("need at least one rate")
        self.arena = arena
        self.K = K
        self.lams_py = [float(x) for x in lams]
        self.lam0 = self.lams_py[0]
        self.ratio = <double*>_grow(NULL, K * sizeof(double))
        for k in range(K):
            self.ratio[k] = (self.lams_py[k] / self.lam0) if self.lam0 > 0 else 0.0
        self.gen_factory = gen_factory
        self.gen = None
        self.pos = 0
        self.blen = 0
        self.chunk = MIN_CHUNK
        self.draws = 0
        self.rkind = rkind
        self.ranchor = ranchor
        self.rarg = rarg
        self.check = 1 if check else 0
        self.violations = 0

        self.nk = 0
        self.vcap = 0
        n0 = arena.n
        self._reserve_v(n0 + 1)
        for v in range(n0):
            self._init_vertex(v)
            self._allowed[v] = 1 if allowed0[v] else 0
            self._dist[v] = dist0[v]
        self.nk = n0
        self.nil = 0
        self.ilcap = 64
        self._ilist = <int*>_grow(NULL, self.ilcap * sizeof(int))

        self._n_inf = <long long*>_grow(NULL, K * sizeof(long long))
        self._n_front = <long long*>_grow(NULL, K * sizeof(long long))
        self._n_ever = <long long*>_grow(NULL, K * sizeof(long long))
        self._left = <char*>_grow(NULL, K * sizeof(char))
        self._active = <char*>_grow(NULL, K * sizeof(char))
        self._reason = <int*>_grow(NULL, K * sizeof(int))
        self._at = <double*>_grow(NULL, K * sizeof(double))
        self._snap_inf = <long long*>_grow(NULL, K * sizeof(long long))
        self._snap_front = <long long*>_grow(NULL, K * sizeof(long long))
        self._n_hit = <int*>_grow(NULL, K * sizeof(int))
        self._thr = <double*>_grow(NULL, K * sizeof(double))
        self._dthr = <long long*>_grow(NULL, K * sizeof(long long))
        self._disc = <double*>_grow(NULL, K * sizeof(double))
        for k in range(K):
            self._n_inf[k] = 0
            self._n_front[k] = 0
            self._n_ever[k] = 0
            self._left[k] = 0
            self._active[k] = 1
            self._reason[k] = RUNNING
            self._at[k] = 0.0
            self._snap_inf[k] = 0
            self._snap_front[k] = 0
            self._n_hit[k] = 0
            self._thr[k] = 0.0
            self._dthr[k] = 2
            self._disc[k] = -1.0
        self.t = 0.0
        self.events = 0
        self.x0 = start
        self.reinf = [[] for _ in range(K)]
        self.exits = [[] for _ in range(K)]
        self.n_active = K
        self.snap_w = [[] for _ in range(K)]

        self.max_time = INFINITY
        self.max_inf = 1LL << 62
        self.ftarget = 0
        self.max_events = 0
        self.ntargets = 0
        self.sig_m = 0
        self.reentry = 0
        self.gap = 0.0
        self.sig = [[] for _ in range(K)]
        self.ep_len = 0.0
        self.ep_idx = 0
        self.next_ep = INFINITY
        self.records = []
        self.masks = 0
        self.nrho = 0
        self.dbl = 0
        self.dtimes = [[] for _ in range(K)]

        self.last_src = -1
        self.last_tgt = -1

        for k in range(K):
            self._infect(start, k)

    # -- storage ---------------------------------------------------------
    cdef int _reserve_v(self, int need) except -1:
        cdef int cap = self.vcap
        cdef size_t K = self.K
        if need <= cap:
            return 0
        if cap == 0:
            cap = 64
        while cap < need:
            cap *= 2
        self._inf = <char*>_grow(self._inf, cap * K * sizeof(char))
        self._ever = <char*>_grow(self._ever, cap * K * sizeof(char))
        self._cnt = <int*>_grow(self._cnt, cap * K * sizeof(int))
        self._ipos = <int*>_grow(self._ipos, cap * sizeof(int))
        self._tgt = <int*>_grow(self._tgt, cap * sizeof(int))
        self._allowed = <char*>_grow(self._allowed, cap * sizeof(char))
        self._dist = <int*>_grow(self._dist, cap * sizeof(int))
        self.vcap = cap
        return 0

    cdef inline void _init_vertex(self, int v) noexcept:
        cdef int k
        cdef int K = self.K
        for k in range(K):
            self._inf[v * K + k] = 0
            self._ever[v * K + k] = 0
            self._cnt[v * K + k] = 0
        self._ipos[v] = -1
        self._tgt[v] = -1

    cdef double _u(self) except? -1.0:
        cdef double u
        if self.pos == self.blen:
            if self.gen is None:
                self.gen = self.gen_factory()
            self.buf = self.gen.random(self.chunk)
            self.blen = self.chunk
            self.pos = 0
            if self.chunk < MAX_CHUNK:
                self.chunk *= 2
        u = self.buf[self.pos]
        self.pos += 1
        self.draws += 1
        return u

    # -- configuration ---------------------------------------------------
    def set_stop(self, double max_time, long long max_inf, long long ftarget, long long max_events):
        self.max_time = max_time
        self.max_inf = max_inf
        self.ftarget = ftarget
        self.max_events = max_events

    def set_rhos(self, rhos):
        cdef int i
        self.nrho = len(rhos)
        free(self._rhos)
        self._rhos = NULL
        if self.nrho:
            self._rhos = <double*>_grow(NULL, self.nrho * sizeof(double))
            for i in range(self.nrho):
                self._rhos[i] = rhos[i]

    def set_targets(self, targets):
        cdef int K = self.K
        cdef int i, k, v
        self.ntargets = len(targets)
        free(self._hit)
        self._hit = <double*>_grow(NULL, (self.ntargets * K + 1) * sizeof(double))
        for i in range(self.ntargets * K):
            self._hit[i] = -1.0
        for k in range(K):
            self._n_hit[k] = 0
        for i in range(self.ntargets):
            v = targets[i]
            self._tgt[v] = i
            for k in range(K):
                if self._inf[v * K + k]:
                    self._hit[i * K + k] = self.t
                    self._n_hit[k] += 1

    def set_reinfection(self, m, gap):
        cdef int k
        self.sig_m = m
        self.gap = gap
        for k in range(self.K):
            self.sig[k] = []
            self._thr[k] = self.t + self.gap

    def set_reentry(self, count):
        self.reentry = count

    def set_epochs(self, double length):
        self.ep_len = length
        self.ep_idx = 0
        self.next_ep = 0.0

    def set_masks(self, flag):
        # bitmask of the infected set in every epoch record (small trees only)
        self.masks = 1 if flag else 0

    def set_doubling(self):
        cdef int k
        self.dbl = 1
        for k in range(self.K):
            self._dthr[k] = 2
            while self._n_inf[k] >= self._dthr[k]:
                self.dtimes[k].append(self.t)
                self._dthr[k] *= 2

    # -- bookkeeping -----------------------------------------------------
    cdef int _sync(self) except -1:
        cdef Arena arena = self.arena
        cdef int K = self.K
        cdef int v, up, d, a, p, k
        if arena.n > self.vcap:
            self._reserve_v(arena.n)
        while self.nk < arena.n:
            v = self.nk
            self._init_vertex(v)
            up = arena._up[v]
            if up >= 0:
                for k in range(K):
                    self._cnt[v * K + k] = self._ever[up * K + k]
                d = self._dist[up] + 1
                if self.rkind == R_NONE:
                    a = 1
                elif self.rkind == R_BALL:
                    a = 1 if d <= self.rarg else 0
                else:
                    a = 0
            else:
                p = arena._parent[v]
                d = self._dist[p] + 1
                if self.rkind == R_NONE:
                    a = 1
                elif self.rkind == R_SUBTREE:
                    a = self._allowed[p]
                elif self.rkind == R_SUBPLUS:
                    a = self._allowed[p] if p != self.ranchor else 0
                elif self.rkind == R_BALL:
                    a = 1 if d <= self.rarg else 0
                else:
                    a = 0
            self._allowed[v] = a
            self._dist[v] = d
            self.nk += 1
        return 0

    cdef list _weights(self, int k):
        cdef int K = self.K
        cdef int i, j, v
        cdef double rho, w
        cdef int* level = self.arena._level
        out = []
        for j in range(self.nrho):
            rho = self._rhos[j]
            w = 0.0
            for i in range(self.nil):
                v = self._ilist[i]
                if self._inf[v * K + k]:
                    w += pow(rho, <double>level[v])
            out.append(w)
        return out

    cdef int _freeze(self, int k, int reason, double at) except -1:
        self._active[k] = 0
        self.n_active -= 1
        self._reason[k] = reason
        self._at[k] = at
        self._snap_inf[k] = self._n_inf[k]
        self._snap_front[k] = self._n_front[k]
        self.snap_w[k] = self._weights(k)
        return 0

    cdef int _record_epoch(self, double when) except -1:
        cdef int K = self.K
        cdef int k, i, v
        cdef int xb = self.x0 * K
        cdef double m
        rec = self.records
        rec.append(when)
        for k in range(K):
            rec.append(<double>self._n_inf[k])
            rec.append(<double>self._n_front[k])
            rec.append(<double>self._inf[xb + k])
            rec.extend(self._weights(k))
            if self.masks:
                m = 0.0
                for i in range(self.nil):
                    v = self._ilist[i]
                    if self._inf[v * K + k]:
                        m += ldexp(1.0, v)
                rec.append(m)
        return 0

    cdef int _infect(self, int y, int k) except -1:
        cdef Arena arena = self.arena
        cdef int K = self.K
        cdef int yb = y * K + k
        cdef int p, pb, ti
        if not self._ever[yb]:
            if k == 0:
                arena._realize_children(y)
                if arena.n > self.nk:
                    self._sync()
            self._ever[yb] = 1
            self._n_ever[k] += 1
            p = arena._parent[y]
            if p >= 0:
                pb = p * K + k
                self._cnt[pb] += 1
                if self._inf[pb] and self._cnt[pb] == arena._nchild[p]:
                    self._n_front[k] -= 1
        self._inf[yb] = 1
        self._n_inf[k] += 1
        if self._cnt[yb] < arena._nchild[y]:
            self._n_front[k] += 1
        if k == 0:
            if self.nil == self.ilcap:
                self.ilcap *= 2
                self._ilist = <int*>_grow(self._ilist, self.ilcap * sizeof(int))
            self._ipos[y] = self.nil
            self._ilist[self.nil] = y
            self.nil += 1
        if y == self.x0 and self._left[k]:
            (<list>self.reinf[k]).append(self.t)
        ti = self._tgt[y]
        if ti >= 0 and self._hit[ti * K + k] < 0.0:
            self._hit[ti * K + k] = self.t
            self._n_hit[k] += 1
        if self.dbl:
            while self._n_inf[k] >= self._dthr[k]:
                (<list>self.dtimes[k]).append(self.t)
                self._dthr[k] *= 2
        if self._active[k]:
            if self.ftarget > 0 and self._n_front[k] >= self.ftarget:
                self._freeze(k, FRONTIER, self.t)
            elif self.ntargets > 0 and self._n_hit[k] == self.ntargets:
                self._freeze(k, TARGET, self.t)
            elif 0 < self.reentry <= len(<list>self.reinf[k]):
                self._freeze(k, REINFECTION, self.t)
            elif self._n_inf[k] >= self.max_inf:
                self._freeze(k, MASSCAP, self.t)
        return 0

    cdef int _recover(self, int x) except -1:
        cdef Arena arena = self.arena
        cdef int K = self.K
        cdef int xb = x * K
        cdef int k, i, last
        for k in range(K):
            if self._inf[xb + k]:
                self._inf[xb + k] = 0
                self._n_inf[k] -= 1
                if self._cnt[xb + k] < arena._nchild[x]:
                    self._n_front[k] -= 1
                if x == self.x0:
                    self._left[k] = 1
                    (<list>self.exits[k]).append(self.t)
                if self._active[k] and self._n_inf[k] == 0:
                    self._freeze(k, EXTINCT, self.t)
        i = self._ipos[x]
        self.nil -= 1
        last = self._ilist[self.nil]
        if last != x:
            self._ilist[i] = last
            self._ipos[last] = i
        self._ipos[x] = -1
        return 0

    cdef int _interval(self, double t_end, int inclusive) except -1:
        cdef int K = self.K
        cdef int xb, k
        cdef double s
        if self.ep_len > 0.0:
            while self.next_ep < t_end or (inclusive and self.next_ep <= t_end):
                self._record_epoch(self.next_ep)
                self.ep_idx += 1
                self.next_ep = self.ep_idx * self.ep_len
        if self.sig_m > 0:
            xb = self.x0 * K
            for k in range(K):
                if self._active[k] and self._inf[xb + k]:
                    while self._thr[k] < t_end or (inclusive and self._thr[k] <= t_end):
                        s = self._thr[k] if self._thr[k] > self.t else self.t
                        (<list>self.sig[k]).append(s)
                        self._thr[k] = s + self.gap
                        if len(<list>self.sig[k]) >= self.sig_m:
                            self._freeze(k, REINFECTION, s)
                            break
        return 0

    cdef int _target(self, int x, int j, int hp) except -2:
        cdef Arena arena = self.arena
        cdef int p, c
        if hp and j == 0:
            p = arena._parent[x]
            if p < 0:
                if self.rkind == R_NONE:
                    pass
                elif self.rkind == R_BALL and self._dist[x] + 1 <= self.rarg:
                    pass
                else:
                    return -1
                p = arena._realize_parent(x)
                self._sync()
            return p if self._allowed[p] else -1
        c = arena._child(x, j - hp)
        return c if self._allowed[c] else -1

    cdef void _check(self) noexcept:
        cdef int K = self.K
        cdef int k, i, v, a
        cdef long long c
        for k in range(1, K):
            c = 0
            for i in range(self.nil):
                v = self._ilist[i]
                a = self._inf[v * K + k]
                if a > self._inf[v * K + k - 1]:
                    self.violations += 1
                c += a
            if c != self._n_inf[k]:
                self.violations += 1

    cdef int _event(self) except -1:
        cdef Arena arena = self.arena
        cdef int K = self.K
        cdef long long n
        cdef double bound, t_new, s, mark
        cdef int x, y, j, hp, k, xb, yb, changed
        while True:
            n = self._n_inf[0]
            if n == 0:
                return EV_EXTINCT
            bound = 1.0 + self.lam0 * arena.max_deg
            t_new = self.t - log1p(-self._u()) / (<double>n * bound)
            if t_new > self.max_time:
                self._interval(self.max_time, 1)
                self.t = self.max_time
                return EV_TIMECAP
            self._interval(t_new, 0)
            self.t = t_new
            x = self._ilist[<long long>(self._u() * n)]
            s = self._u() * bound
            self.last_src = x
            if s < 1.0:
                self.last_tgt = x
                self.events += 1
                self._recover(x)
                return EV_RECOVERY
            j = <int>((s - 1.0) / self.lam0)
            if j >= arena.max_deg:
                j = arena.max_deg - 1
            hp = 1 if (arena.kind == K_PERIODIC or arena._parent[x] >= 0) else 0
            if j >= arena._nchild[x] + hp:
                continue
            mark = self._u() if K > 1 else 0.0
            self.events += 1
            y = self._target(x, j, hp)
            self.last_tgt = y
            if y < 0:
                return EV_SUPPRESSED
            xb = x * K
            yb = y * K
            changed = 0
            for k in range(K):
                if self._inf[xb + k] and not self._inf[yb + k] and (k == 0 or mark < self.ratio[k]):
                    self._infect(y, k)
                    changed = 1
            return EV_INFECTION if changed else EV_NOOP

    cdef int _post(self) except -1:
        cdef int K = self.K
        cdef int k
        for k in range(1, K):
            if self._disc[k] < 0.0 and self._n_inf[k] != self._n_inf[k - 1]:
                self._disc[k] = self.t
        if self.check:
            self._check()
        if self.max_events > 0 and self.events >= self.max_events:
            for k in range(K):
                if self._active[k]:
                    self._freeze(k, EVENTCAP, self.t)
        return 0

    cdef int _step(self) except -1:
        cdef int code = self._event()
        cdef int k
        if code == EV_TIMECAP:
            for k in range(self.K):
                if self._active[k]:
                    self._freeze(k, TIMECAP, self.t)
        elif code != EV_EXTINCT:
            self._post()
        return code

    def step(self):
        """Apply one real event and return its EV_* code."""
        return self._step()

    def precheck(self):
        cdef int K = self.K
        cdef int k
        self._interval(self.t, 1)
        for k in range(K):
            if not self._active[k]:
                continue
            if self._n_inf[k] == 0:
                self._freeze(k, EXTINCT, self.t)
            elif self.ftarget > 0 and self._n_front[k] >= self.ftarget:
                self._freeze(k, FRONTIER, self.t)
            elif self.ntargets > 0 and self._n_hit[k] == self.ntargets:
                self._freeze(k, TARGET, self.t)
            elif self.sig_m > 0 and len(<list>self.sig[k]) >= self.sig_m:
                self._freeze(k, REINFECTION, self.sig[k][self.sig_m - 1])
            elif self._n_inf[k] >= self.max_inf:
                self._freeze(k, MASSCAP, self.t)
            elif self.t >= self.max_time:
                self._freeze(k, TIMECAP, self.t)
            elif self.max_events > 0 and self.events >= self.max_events:
                self._freeze(k, EVENTCAP, self.t)

    def run(self):
        self.precheck()
        while self.n_active > 0:
            self._step()

    def advance(self, double t_end):
        """Keep evolving (frozen levels included) up to time t_end."""
        cdef int code
        self.max_time = t_end
        while True:
            code = self._step()
            if code == EV_TIMECAP or code == EV_EXTINCT:
                return code

    # -- accessors -------------------------------------------------------
    @property
    def n_inf(self):
        return [self._n_inf[k] for k in range(self.K)]

    @property
    def n_front(self):
        return [self._n_front[k] for k in range(self.K)]

    @property
    def n_ever(self):
        return [self._n_ever[k] for k in range(self.K)]

    @property
    def ilist(self):
        return [self._ilist[i] for i in range(self.nil)]

    def infected(self, int k):
        cdef int K = self.K
        cdef int i, v
        out = []
        for i in range(self.nil):
            v = self._ilist[i]
            if self._inf[v * K + k]:
                out.append(v)
        return out

    def is_infected(self, int v, int k):
        return bool(self._inf[v * self.K + k])

    def is_ever(self, int v, int k):
        return bool(self._ever[v * self.K + k])

    def child_count_ever(self, int v, int k):
        return self._cnt[v * self.K + k]

    def is_allowed(self, int v):
        return bool(self._allowed[v])

    def hit_time(self, int i, int k):
        return self._hit[i * self.K + k]

    def weights(self, int k):
        return self._weights(k)

    def get_records(self):
        return list(self.records)

    def state(self):
        """Plain-Python copy of the per-level scalar state."""
        cdef int K = self.K
        return {
            "t": self.t,
            "events": self.events,
            "n_inf": [self._n_inf[k] for k in range(K)],
            "n_front": [self._n_front[k] for k in range(K)],
            "n_ever": [self._n_ever[k] for k in range(K)],
            "reason": [self._reason[k] for k in range(K)],
            "at": [self._at[k] for k in range(K)],
            "snap_inf": [self._snap_inf[k] for k in range(K)],
            "snap_front": [self._snap_front[k] for k in range(K)],
            "snap_w": [list(w) for w in self.snap_w],
            "reinf": [list(r) for r in self.reinf],
            "exits": [list(r) for r in self.exits],
            "sig": [list(s) for s in self.sig],
            "disc": [self._disc[k] for k in range(K)],
            "dtimes": [list(d) for d in self.dtimes],
            "records": list(self.records),
            "violations": self.violations,
            "draws": self.draws,
        }
