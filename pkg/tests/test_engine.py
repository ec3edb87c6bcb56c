import math

import numpy as np
import pytest

from treecp import engine as E
from treecp.trees import Constant, Fixed, GW, GWPlus, LazyTree, Periodic


def tree(topo=GW(Constant(2)), seed=0):
    return LazyTree(topo, seed)


def prop_within(hits, n, p, z=3.0):
    se = math.sqrt(p * (1 - p) / n)
    return abs(hits / n - p) <= z * se


# -- initProcess ---------------------------------------------------------

def test_init_state():
    s = E.init_process(tree(), 1.0, seed=0)
    assert s.n_infected() == 1 and s.n_frontier() == 1
    assert s.time == 0.0
    assert sorted(s.accessible()) == sorted(s.tree.children(0))
    assert len(s.accessible()) == 2


def test_lambda_zero_extinct_after_exp1():
    times = []
    for r in range(3000):
        s = E.init_process(tree(seed=(1, r)), 0.0, seed=(1, r))
        ev = E.next_event(s)
        assert ev.kind == "recovery"
        times.append(ev.time)
        assert s.n_infected() == 0
    x = np.array(times)
    assert abs(x.mean() - 1.0) <= 3 * x.std(ddof=1) / math.sqrt(len(x))


def test_path_restriction():
    t = tree(GW(Constant(3)), 2)
    e3 = t.chain(3)
    path = {t.chain(i) for i in range(4)}
    for seed in range(20):
        s = E.init_process(t, 5.0, E.Path(0, e3), seed=seed)
        E.run(s, E.StopCondition(max_time=5.0))
        assert s.ever_infected() <= path
    assert {v for v in range(t.size) if s.is_allowed(v)} == path


def test_unknown_restriction_vertex():
    with pytest.raises(E.EngineError):
        E.init_process(tree(), 1.0, E.Subtree(999), seed=0)


# -- nextEvent -----------------------------------------------------------

def test_first_event_infection_probability():
    n, hits = 6000, 0
    for r in range(n):
        s = E.init_process(tree(seed=(2, r)), 1.0, seed=(2, r))
        hits += E.next_event(s).kind == "infection"
    assert prop_within(hits, n, 2 / 3)


def test_extinct_state_rejects_events():
    s = E.init_process(tree(), 0.0, seed=0)
    E.next_event(s)
    with pytest.raises(E.EngineError):
        E.next_event(s)


def test_noop_arrow_leaves_state():
    t = LazyTree(Fixed((1, 0)), 0)
    for seed in range(200):
        s = E.init_process(t, 3.0, seed=seed)
        while s.n_infected() > 0:
            before = (s.infected(), s.ever_infected(), s.frontier())
            t0 = s.time
            ev = E.next_event(s)
            if ev.kind == "noop":
                assert (s.infected(), s.ever_infected(), s.frontier()) == before
                assert s.time >= t0
                return
    pytest.fail("no no-op arrow observed")


# -- run -----------------------------------------------------------------

def test_run_zero_time():
    out = E.run(E.init_process(tree(), 1.0, seed=0), E.StopCondition(max_time=0.0))
    assert out.reason == "TimeCap" and out.at == 0.0 and out.snapshot.n_infected == 1


def test_run_lambda_zero_frontier():
    out = E.run(E.init_process(tree(), 0.0, seed=0), E.StopCondition(frontier_target=2))
    assert out.reason == "Extinct"


def test_frontier_target_probability():
    n, hits = 6000, 0
    for r in range(n):
        s = E.init_process(tree(seed=(3, r)), 1.0, seed=(3, r))
        hits += E.run(s, E.StopCondition(frontier_target=2)).reason == "FrontierReached"
    assert prop_within(hits, n, 2 / 3)


def test_extinct_iff_empty():
    for seed in range(50):
        s = E.init_process(tree(GW(Constant(2)), seed), 0.4, seed=seed)
        out = E.run(s, E.StopCondition(max_time=20.0))
        assert (out.reason == "Extinct") == (s.n_infected() == 0)


def test_stop_condition_needs_a_bound():
    with pytest.raises(E.EngineError):
        E.StopCondition()


def test_state_runs_once():
    s = E.init_process(tree(), 1.0, seed=0)
    E.run(s, E.StopCondition(max_time=1.0))
    with pytest.raises(E.EngineError):
        E.run(s, E.StopCondition(max_time=2.0))


def test_epoch_snapshots():
    s = E.init_process(tree(GW(Constant(2)), 1), 2.0, seed=1)
    out = E.run(s, E.StopCondition(max_time=3.0), epoch=0.5, rhos=(0.5,))
    ts = [e[0] for e in out.snapshot.epochs]
    assert ts[:2] == [0.0, 0.5]
    if out.reason == "TimeCap":
        assert ts == [0.5 * i for i in range(7)]


# -- tauK ----------------------------------------------------------------

def test_tau_one_is_zero():
    assert E.tau_k(GW(Constant(2)), 1.0, 1, 10.0, seed=0).time == 0.0


def test_tau_censored_at_zero_rate():
    c = E.tau_k(GW(Constant(2)), 0.0, 2, 10.0, seed=0)
    assert c.censored and c.reason == "Extinct"


def test_tau_two_probability():
    n = 6000
    hits = sum(not E.tau_k(GW(Constant(2)), 1.0, 2, 50.0, seed=(4, r)).censored for r in range(n))
    assert prop_within(hits, n, 2 / 3)


# -- coupledRun ----------------------------------------------------------

def test_coupling_equal_rates():
    stop = E.StopCondition(max_time=5.0, max_infected=3000)
    for seed in range(20):
        res = E.coupled_run(GW(Constant(3)), 1.2, 1.2, stop, seed=seed, check=True)
        assert res.first_discrepancy == math.inf
        assert res.high.reason == res.low.reason and res.high.at == res.low.at


def test_coupling_containment():
    stop = E.StopCondition(max_events=5000)
    for seed in range(20):
        assert E.coupled_run(GW(Constant(3)), 2.0, 1.5, stop, seed=seed, check=True).violations == 0


def test_coupling_rate_order():
    with pytest.raises(E.EngineError):
        E.coupled_run(GW(Constant(2)), 1.0, 1.5, E.StopCondition(max_time=1.0))


def test_discrepancy_monotone_in_delta():
    stop = E.StopCondition(max_time=3.0, max_infected=300)
    deltas = (0.0, 0.05, 0.2, 0.5, 1.0)
    counts = np.zeros(len(deltas))
    for seed in range(100):
        d = [E.coupled_run(GW(Constant(3)), 1.5, 1.5 - dl, stop, seed=seed).first_discrepancy for dl in deltas]
        assert all(a >= b for a, b in zip(d, d[1:]))
        counts += [x <= 3.0 for x in d]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_ladder_order_and_nesting():
    lams = [0.5, 2.0, 1.0]
    stop = E.StopCondition(max_time=4.0, max_infected=2000)
    for seed in range(10):
        outs, state = E.ladder_run(GW(Constant(2)), lams, stop, seed=seed, check=True)
        assert state.violations == 0
        assert len(outs) == 3
        # the 2.0 process dies no earlier than the 1.0 one, which dies no earlier than 0.5
        end = [o.at if o.reason == "Extinct" else math.inf for o in outs]
        assert end[1] >= end[2] >= end[0]


# -- weightOfState -------------------------------------------------------

def test_weight_root_only():
    s = E.init_process(tree(), 1.0, seed=0)
    assert E.weight_of_state(s, 0.3) == 1.0


def test_weight_root_and_children():
    for seed in range(500):
        s = E.init_process(tree(GW(Constant(2)), seed), 3.0, seed=seed)
        for _ in range(6):
            if s.n_infected() == 0:
                break
            E.next_event(s)
            if s.infected() == {0, *s.tree.children(0)}:
                assert E.weight_of_state(s, 0.5) == 2.0
                return
    pytest.fail("no state {root, both children} reached")


def test_weight_empty():
    s = E.init_process(tree(), 0.0, seed=0)
    E.next_event(s)
    assert E.weight_of_state(s, 0.5) == 0.0


@pytest.mark.parametrize("rho", [0.0, 1.0, 1.5])
def test_weight_rho_domain(rho):
    with pytest.raises(E.EngineError):
        E.weight_of_state(E.init_process(tree(), 1.0, seed=0), rho)


def test_weight_periodic_levels():
    t = LazyTree(Periodic((2, 3, 4)), 0)
    s = E.init_process(t, 2.0, seed=3)
    for _ in range(30):
        if s.n_infected() == 0:
            break
        E.next_event(s)
    direct = math.fsum(0.6 ** t.level(v) for v in s.infected())
    assert E.weight_of_state(s, 0.6) == pytest.approx(direct, rel=1e-12)


# -- recurrenceTimes -----------------------------------------------------

def test_recurrence_first_visit_at_zero():
    r = E.recurrence_times(GWPlus(Constant(2)), 0, 1.0, 1, 0.0, 10.0, seed=0)
    assert r.times == [0.0] and not r.censored


def test_recurrence_censored_without_infection():
    r = E.recurrence_times(GWPlus(Constant(2)), 0, 0.0, 2, 0.5, 10.0, seed=0)
    assert r.censored


def test_recurrence_gaps():
    for seed in range(30):
        r = E.recurrence_times(GW(Constant(3)), 0, 1.0, 5, 0.7, 40.0, seed=seed, max_infected=5000)
        assert all(b - a >= 0.7 - 1e-12 for a, b in zip(r.times, r.times[1:]))


def test_recurrence_probability_monotone():
    lams, n = (0.4, 0.7, 1.0), 600
    p = []
    for lam in lams:
        hits = sum(not E.recurrence_times(GW(Constant(2)), 0, lam, 3, 0.5, 8.0, seed=(5, r),
                                          max_infected=10 ** 4).censored
                   for r in range(n))
        p.append(hits / n)
    for a, b in zip(p, p[1:]):
        se = math.sqrt((a * (1 - a) + b * (1 - b)) / n)
        assert b >= a - 3 * se
