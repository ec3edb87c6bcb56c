"""Property tests for tree realization and process invariants."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from treecp import engine as E
from treecp import trees as T
from treecp.trees import Constant, GeometricShifted, GW, GWPlus, LazyTree, Periodic, PoissonConditioned

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

periods = st.lists(st.integers(1, 4), min_size=1, max_size=4).filter(lambda p: math.prod(p) != 1)
topologies = st.one_of(
    st.builds(GW, st.sampled_from([Constant(2), Constant(3), GeometricShifted(0.5), PoissonConditioned(1.5)])),
    st.builds(GWPlus, st.sampled_from([Constant(2), GeometricShifted(0.4)])),
    st.builds(Periodic, periods, st.just(0)),
)
seeds = st.integers(0, 2 ** 63)


@SETTINGS
@given(topologies, seeds, st.lists(st.tuples(st.booleans(), st.integers(0, 10 ** 6)), max_size=60))
def test_realize_once_and_levels(topo, seed, ops):
    tree = LazyTree(topo, seed)
    seen = {}
    for up, pick in ops:
        if up and isinstance(topo, Periodic):
            tree.realize_parent(tree.apex)
        else:
            v = pick % tree.size
            seen.setdefault(v, tuple(tree.realize_children(v)))
    for v, kids in seen.items():
        assert tuple(tree.realize_children(v)) == kids
    for v in range(tree.size):
        p = tree.parent(v)
        if p is not None:
            assert tree.level(v) == tree.level(p) + 1
    assert tree.level(tree.root) == 0
    apex = tree.apex_chain()
    assert [tree.level(v) for v in apex] == [-(i + 1) for i in range(len(apex))]


@SETTINGS
@given(topologies, seeds, st.lists(st.integers(0, 10 ** 6), max_size=30))
def test_seed_determinism(topo, seed, picks):
    a, b = LazyTree(topo, seed), LazyTree(topo, seed)
    for pick in picks:
        a.realize_children(pick % a.size)
        b.realize_children(pick % b.size)
    assert [a.vertex(v) for v in range(a.size)] == [b.vertex(v) for v in range(b.size)]


@SETTINGS
@given(periods, st.data())
def test_period_consistency(p, data):
    rt = data.draw(st.integers(0, len(p) - 1))
    topo = Periodic(tuple(p), rt)
    tree = LazyTree(topo, 0)
    kappa = len(p)
    tree.realize_to_depth(2 * kappa)
    for v in range(tree.size):
        rec = tree.vertex(v)
        assert rec.period_type == (rt + rec.level) % kappa
        if rec.children_realized:
            assert len(rec.children) == p[rec.period_type]


@SETTINGS
@given(st.sampled_from([Constant(2), GeometricShifted(0.3), PoissonConditioned(2.0), T.StretchedExp(0.4),
                        T.BinomialLaw(5, 0.3), T.FiniteSupport(((0, 0.2), (2, 0.5), (5, 0.3)))]),
       st.floats(0, 1), st.floats(0, 1))
def test_gf_convex_monotone(law, s, t):
    f = lambda x: T.generating_function(law, x)
    assert f(0.5 * (s + t)) <= 0.5 * (f(s) + f(t)) + 1e-9
    lo, hi = min(s, t), max(s, t)
    assert f(lo) <= f(hi) + 1e-12


@settings(max_examples=15, deadline=None)
@given(topologies, seeds, st.floats(0.3, 3.0))
def test_frontier_matches_definition(topo, seed, lam):
    tree = LazyTree(topo, seed)
    state = E.init_process(tree, lam, seed=seed)
    for _ in range(150):
        if state.n_infected() == 0:
            break
        E.next_event(state)
        inf = state.infected()
        assert state.frontier() == E.frontier_from_scratch(state)
        assert state.frontier() <= inf <= state.ever_infected()
        assert state.n_infected() == len(inf)
        assert state.n_frontier() == len(state.frontier())


@settings(max_examples=15, deadline=None)
@given(topologies, seeds, st.floats(0.1, 3.0), st.floats(0.0, 1.0))
def test_monotone_coupling_containment(topo, seed, lam, frac):
    res = E.coupled_run(LazyTree(topo, seed), lam, lam * frac, E.StopCondition(max_events=3000),
                        seed=seed, check=True)
    assert res.violations == 0


@settings(max_examples=15, deadline=None)
@given(topologies, seeds, st.floats(0.0, 3.0))
def test_determinism(topo, seed, lam):
    stop = E.StopCondition(max_time=5.0, max_infected=500)

    def once():
        state = E.init_process(LazyTree(topo, seed), lam, seed=seed)
        out = E.run(state, stop, epoch=0.5, rhos=(0.5,))
        return out, state.ladder.state()

    assert once() == once()


def _first_event_times(topo, lam, n, restriction=None):
    out = []
    for r in range(n):
        state = E.init_process(LazyTree(topo, (77, r)), lam, restriction, seed=(77, r))
        out.append(E.next_event(state).time)
    return np.array(out)


def test_rate_accounting():
    """The first holding time from a single infected vertex is Exp(1 + lam * degree).

    Arrows suppressed by a restriction still count, so confining to a ball of
    radius 0 must not change the rate.
    """
    lam = 0.7
    cases = [(GW(Constant(2)), 2, None), (GWPlus(Constant(2)), 1, None),
             (Periodic((2, 3, 4)), 3, None), (GW(Constant(3)), 3, E.Ball(0, 0))]
    for topo, deg, restr in cases:
        x = _first_event_times(topo, lam, 4000, restr)
        rate = 1 + lam * deg
        se = x.std(ddof=1) / math.sqrt(len(x))
        assert abs(x.mean() - 1 / rate) <= 3 * se, (topo, x.mean(), 1 / rate)
