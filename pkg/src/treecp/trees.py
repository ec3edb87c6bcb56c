"""Offspring laws, tree topologies and lazily realized trees."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

from . import _codes as C
from . import rng
from ._backend import Arena

SUBEXPONENTIAL = "Subexponential"
EXPONENTIAL_TAIL = "ExponentialTail"
BOUNDED_SUPPORT = "BoundedSupport"

TAIL_CUTOFF = 1e-15
MAX_TABLE = 1 << 20


class LawError(ValueError):
    pass


def _check_prob(p, name="p"):
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise LawError(f"{name} must lie in [0, 1], got {p!r}")


@dataclass(frozen=True)
class Constant:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise LawError("Constant needs a positive integer")

    def mean(self):
        return float(self.m)

    def prob_at_least(self, k):
        return 1.0 if self.m >= k else 0.0

    def tail_class(self):
        return BOUNDED_SUPPORT

    def pmf(self):
        return (self.m,), (1.0,)

    def generating_function(self, s):
        return s ** self.m

    def gf_derivative(self, s):
        return self.m * s ** (self.m - 1)

    def describe(self):
        return f"const:{self.m}"


@dataclass(frozen=True)
class FiniteSupport:
    pairs: tuple

    def __post_init__(self):
        pairs = tuple(sorted((int(v), float(p)) for v, p in self.pairs))
        if not pairs:
            raise LawError("FiniteSupport needs at least one atom")
        for v, p in pairs:
            if v < 0:
                raise LawError("offspring values must be non-negative")
            _check_prob(p)
        if len({v for v, _ in pairs}) != len(pairs):
            raise LawError("duplicate offspring value")
        if abs(sum(p for _, p in pairs) - 1.0) > 1e-12:
            raise LawError("probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "pairs", pairs)

    def mean(self):
        return sum(v * p for v, p in self.pairs)

    def prob_at_least(self, k):
        return min(1.0, sum(p for v, p in self.pairs if v >= k))

    def tail_class(self):
        return BOUNDED_SUPPORT

    def pmf(self):
        return tuple(v for v, _ in self.pairs), tuple(p for _, p in self.pairs)

    def generating_function(self, s):
        return sum(p * s ** v for v, p in self.pairs)

    def gf_derivative(self, s):
        return sum(p * v * s ** (v - 1) for v, p in self.pairs if v > 0)

    def describe(self):
        return "finite:" + ",".join(f"{v}={p!r}" for v, p in self.pairs)


@dataclass(frozen=True)
class GeometricShifted:
    """P(D = k) = (1-p)^(k-1) p for k >= 1; mean 1/p."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise LawError("GeometricShifted needs p in (0, 1]")

    def mean(self):
        return 1.0 / self.p

    def prob_at_least(self, k):
        if k <= 1:
            return 1.0
        return (1.0 - self.p) ** (k - 1)

    def tail_class(self):
        return EXPONENTIAL_TAIL

    def pmf(self):
        return _table(self)

    def generating_function(self, s):
        return self.p * s / (1.0 - (1.0 - self.p) * s)

    def gf_derivative(self, s):
        q = 1.0 - self.p
        return self.p / (1.0 - q * s) ** 2

    def describe(self):
        return f"geom:{self.p!r}"


@dataclass(frozen=True)
class PoissonConditioned:
    """Poisson(mu) conditioned on D >= 1; mean mu / (1 - exp(-mu))."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0.0:
            raise LawError("PoissonConditioned needs mu > 0")

    def mean(self):
        return self.mu / -math.expm1(-self.mu)

    def prob_at_least(self, k):
        if k <= 1:
            return 1.0
        below = sum(_poisson_pmf(self.mu, j) for j in range(1, k))
        return max(0.0, 1.0 - below / -math.expm1(-self.mu))

    def tail_class(self):
        return EXPONENTIAL_TAIL

    def pmf(self):
        return _table(self)

    def generating_function(self, s):
        return (math.exp(self.mu * (s - 1.0)) - math.exp(-self.mu)) / -math.expm1(-self.mu)

    def gf_derivative(self, s):
        return self.mu * math.exp(self.mu * (s - 1.0)) / -math.expm1(-self.mu)

    def describe(self):
        return f"poisson:{self.mu!r}"


@dataclass(frozen=True)
class StretchedExp:
    """D = 1 + E with P(E >= k) = exp(-k^alpha) for k >= 0.

    The shift gives support {1, 2, ...} and P(D >= k) = exp(-(k-1)^alpha),
    already normalized. The mean is 1 + sum_{k>=1} exp(-k^alpha).
    """

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise LawError("StretchedExp needs alpha in (0, 1)")

    def mean(self):
        vals, probs = _table(self)
        return sum(v * p for v, p in zip(vals, probs))

    def prob_at_least(self, k):
        if k <= 1:
            return 1.0
        return math.exp(-((k - 1) ** self.alpha))

    def tail_class(self):
        return SUBEXPONENTIAL

    def pmf(self):
        return _table(self)

    def generating_function(self, s):
        vals, probs = _table(self)
        return sum(p * s ** v for v, p in zip(vals, probs))

    def gf_derivative(self, s):
        vals, probs = _table(self)
        return sum(p * v * s ** (v - 1) for v, p in zip(vals, probs))

    def describe(self):
        return f"stretched:{self.alpha!r}"


@dataclass(frozen=True)
class BinomialLaw:
    n: int
    p: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise LawError("BinomialLaw needs a positive integer n")
        _check_prob(self.p)

    def mean(self):
        return self.n * self.p

    def prob_at_least(self, k):
        vals, probs = self.pmf()
        return min(1.0, sum(p for v, p in zip(vals, probs) if v >= k))

    def tail_class(self):
        return BOUNDED_SUPPORT

    def pmf(self):
        return _table(self)

    def generating_function(self, s):
        return (1.0 - self.p + self.p * s) ** self.n

    def gf_derivative(self, s):
        return self.n * self.p * (1.0 - self.p + self.p * s) ** (self.n - 1)

    def describe(self):
        return f"binom:{self.n},{self.p!r}"


LAWS = (Constant, FiniteSupport, GeometricShifted, PoissonConditioned, StretchedExp, BinomialLaw)


def _poisson_pmf(mu, k):
    return math.exp(k * math.log(mu) - mu - math.lgamma(k + 1))


@lru_cache(maxsize=64)
def _table(law):
    """Truncated (values, probabilities) table for laws with a long tail."""
    if isinstance(law, BinomialLaw):
        vals = tuple(range(law.n + 1))
        probs = tuple(math.comb(law.n, k) * law.p ** k * (1 - law.p) ** (law.n - k) for k in vals)
        return vals, probs
    vals, probs = [], []
    tail = 1.0
    k = 1
    while tail >= TAIL_CUTOFF:
        if isinstance(law, GeometricShifted):
            pk = (1.0 - law.p) ** (k - 1) * law.p
        elif isinstance(law, PoissonConditioned):
            pk = _poisson_pmf(law.mu, k) / -math.expm1(-law.mu)
        else:
            pk = math.exp(-((k - 1) ** law.alpha)) - math.exp(-(k ** law.alpha))
        vals.append(k)
        probs.append(pk)
        tail -= pk
        k += 1
        if len(vals) >= MAX_TABLE:
            warnings.warn(f"{law.describe()}: offspring table capped at {MAX_TABLE} entries "
                          f"with tail mass {tail:.3g} folded into the last entry")
            break
    probs[-1] += max(tail, 0.0)
    return tuple(vals), tuple(probs)


@lru_cache(maxsize=64)
def sampler_table(law):
    """Inverse-CDF table (cdf, values); the last cdf entry is exactly 1."""
    vals, probs = law.pmf()
    cdf, acc = [], 0.0
    for p in probs:
        acc += p
        cdf.append(acc)
    cdf[-1] = 1.0
    return tuple(cdf), tuple(vals)


def generating_function(law, s):
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return law.generating_function(s)


def extinction_fixed_point(law, tol=1e-10):
    """Smallest root of f(s) = s on [0, 1]."""
    p0 = law.generating_function(0.0)
    if p0 == 0.0:
        return 0.0
    if law.mean() <= 1.0 and law.prob_at_least(2) > 0.0:
        return 1.0
    if law.mean() <= 1.0:
        # D takes only values 0 and 1
        return 1.0
    s = 0.0
    for _ in range(1_000_000):
        nxt = law.generating_function(s)
        if nxt - s <= tol:
            s = nxt
            break
        s = nxt
    # the iteration creeps up from below; a few Newton steps tighten it
    for _ in range(20):
        g = law.generating_function(s) - s
        dg = law.gf_derivative(s) - 1.0
        if dg >= 0.0:
            break
        step = g / dg
        s -= step
        if abs(step) < 1e-15:
            break
    return min(max(s, 0.0), 1.0)


def tail_class(law):
    return law.tail_class()


# -- topologies ----------------------------------------------------------

def _check_gw_law(law):
    if law.prob_at_least(1) < 1.0 - 1e-12:
        raise LawError(f"{law.describe()}: tree offspring must satisfy P(D >= 1) = 1")
    if not law.mean() > 1.0:
        raise LawError(f"{law.describe()}: tree offspring must have mean > 1")


@dataclass(frozen=True)
class GW:
    law: object

    def __post_init__(self):
        _check_gw_law(self.law)

    kind = C.GW

    def max_degree(self):
        vals, _ = self.law.pmf()
        return max(vals) + 1

    def describe(self):
        return self.law.describe()


@dataclass(frozen=True)
class GWPlus:
    law: object

    def __post_init__(self):
        _check_gw_law(self.law)

    kind = C.GWPLUS

    def max_degree(self):
        vals, _ = self.law.pmf()
        return max(vals) + 1

    def describe(self):
        return "gw+:" + self.law.describe()


@dataclass(frozen=True)
class Periodic:
    periods: tuple
    root_type: int = 0

    def __post_init__(self):
        periods = tuple(int(a) for a in self.periods)
        if not periods or min(periods) < 1:
            raise LawError("periodic trees need every period entry >= 1")
        if math.prod(periods) == 1:
            raise LawError("periodic trees need a product of periods different from 1")
        if not 0 <= self.root_type < len(periods):
            raise LawError("root type out of range")
        object.__setattr__(self, "periods", periods)

    kind = C.PERIODIC

    @property
    def kappa(self):
        return len(self.periods)

    @property
    def gamma(self):
        return math.prod(self.periods)

    def max_degree(self):
        return max(self.periods) + 1

    def describe(self):
        s = "periodic:" + ",".join(map(str, self.periods))
        return s if self.root_type == 0 else f"{s}@{self.root_type}"


@dataclass(frozen=True)
class Fixed:
    """A finite tree given by child counts in breadth-first order."""

    child_counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.child_counts)
        if not counts or min(counts) < 0:
            raise LawError("child counts must be non-negative")
        if 1 + sum(counts) != len(counts):
            raise LawError("child counts do not describe a finite tree")
        # every prefix must still have an unprocessed vertex
        seen = 1
        for i, c in enumerate(counts):
            if i >= seen:
                raise LawError("child counts do not describe a connected tree")
            seen += c
        object.__setattr__(self, "child_counts", counts)

    kind = C.FIXED

    @property
    def size(self):
        return len(self.child_counts)

    def edges(self):
        out, nxt = [], 1
        for v, c in enumerate(self.child_counts):
            for _ in range(c):
                out.append((v, nxt))
                nxt += 1
        return out

    def max_degree(self):
        deg = [0] * self.size
        for a, b in self.edges():
            deg[a] += 1
            deg[b] += 1
        return max(deg)

    def describe(self):
        return "fixed:" + ",".join(map(str, self.child_counts))


NAMED_TREES = {
    "twovertex": (1, 0),
    "sixvertex": (2, 2, 1, 0, 0, 0),
}


def parse_law(text):
    text = text.strip()
    name, _, arg = text.partition(":")
    name = name.lower()
    try:
        if name == "const":
            return Constant(int(arg))
        if name == "geom":
            return GeometricShifted(float(arg))
        if name == "poisson":
            return PoissonConditioned(float(arg))
        if name == "stretched":
            return StretchedExp(float(arg))
        if name == "binom":
            n, p = arg.split(",")
            return BinomialLaw(int(n), float(p))
        if name == "finite":
            pairs = []
            for item in arg.split(","):
                v, p = item.split("=")
                pairs.append((int(v), float(p)))
            return FiniteSupport(tuple(pairs))
    except LawError:
        raise
    except (TypeError, ValueError) as exc:
        raise LawError(f"cannot parse offspring law {text!r}: {exc}") from None
    raise LawError(f"unknown offspring law {text!r}")


def parse_topology(text):
    """Parse strings such as ``const:2``, ``gw+:geom:0.4`` or ``periodic:2,3,4``."""
    text = text.strip()
    low = text.lower()
    if low in NAMED_TREES:
        return Fixed(NAMED_TREES[low])
    head, _, rest = text.partition(":")
    head = head.lower()
    try:
        if head == "periodic":
            body, _, rt = rest.partition("@")
            return Periodic(tuple(int(a) for a in body.split(",")), int(rt) if rt else 0)
        if head == "fixed":
            return Fixed(tuple(int(a) for a in rest.split(",")))
    except LawError:
        raise
    except ValueError as exc:
        raise LawError(f"cannot parse topology {text!r}: {exc}") from None
    if head == "gw+":
        return GWPlus(parse_law(rest))
    if head == "gw":
        return GW(parse_law(rest))
    return GW(parse_law(text))


# -- lazily realized trees -----------------------------------------------

@dataclass(frozen=True)
class VertexRecord:
    id: int
    parent: int | None
    level: int
    distance: int
    period_type: int
    children_realized: bool
    children: tuple


def make_arena(topology, seed):
    gen = rng.factory(seed, rng.STRUCTURE)
    kind = topology.kind
    if kind in (C.GW, C.GWPLUS):
        cdf, vals = sampler_table(topology.law)
        return Arena(kind, gen, cdf, vals, (), 0, ())
    if kind == C.PERIODIC:
        return Arena(kind, gen, (), (), topology.periods, topology.root_type, ())
    if kind == C.FIXED:
        return Arena(kind, gen, (), (), (), 0, topology.child_counts)
    raise TypeError(f"unsupported topology {topology!r}")


class LazyTree:
    """A tree whose vertices are created the first time they are asked for.

    Handles are small integers; the root is 0. Child counts are drawn from
    the structure stream of ``seed``, which is never shared with process
    randomness.
    """

    def __init__(self, topology, seed=0):
        self.topology = topology
        self.seed = seed
        self.arena = make_arena(topology, seed)

    root = 0

    @property
    def size(self):
        return self.arena.n

    @property
    def apex(self):
        return self.arena.apex

    def _check(self, v):
        if not isinstance(v, int) or not 0 <= v < self.arena.n:
            raise KeyError(f"unknown vertex {v!r}")

    def realize_children(self, v):
        self._check(v)
        self.arena.realize_children(v)
        return self.arena.children(v)

    def realize_parent(self, v):
        if self.topology.kind != C.PERIODIC:
            raise ValueError("upward growth unsupported on this topology")
        self._check(v)
        return self.arena.realize_parent(v)

    def children(self, v):
        self._check(v)
        return self.arena.children(v)

    def parent(self, v):
        self._check(v)
        p = self.arena.parent[v]
        return None if p < 0 else p

    def level(self, v):
        self._check(v)
        return self.arena.level[v]

    def vertex(self, v):
        self._check(v)
        parent, level, depth, ptype, nch = self.arena.vertex(v)
        return VertexRecord(v, None if parent < 0 else parent, level, depth,
                            ptype, nch >= 0, tuple(self.arena.children(v)))

    def chain(self, n):
        """The distinguished vertex e_n: first children downward, ancestors upward."""
        v = self.root
        if n >= 0:
            for _ in range(n):
                v = self.realize_children(v)[0]
            return v
        for _ in range(-n):
            p = self.parent(v)
            v = p if p is not None else self.realize_parent(v)
        return v

    def apex_chain(self):
        out, v = [], self.root
        while self.arena.parent[v] >= 0 and self.arena.level[self.arena.parent[v]] < self.arena.level[v]:
            v = self.arena.parent[v]
            out.append(v)
        return out

    def realize_to_depth(self, depth):
        """Realize every descendant of the root down to the given depth."""
        frontier = [self.root]
        for _ in range(depth):
            nxt = []
            for v in frontier:
                nxt.extend(self.realize_children(v))
            frontier = nxt
        return frontier
