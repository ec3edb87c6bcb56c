import math

import numpy as np
import pytest

from treecp import analysis as A
from treecp import oracle
from treecp.trees import Constant, FiniteSupport, Fixed, GW, GWPlus, LazyTree, Periodic


# -- survival ------------------------------------------------------------

def test_survival_zero_rate():
    est = A.estimate_survival(GW(Constant(2)), 0.0, 200, 10.0, seed=1)
    assert est.value == 0.0 and est.lo <= 0.0 <= est.hi


def test_survival_two_vertex_oracle():
    tree = Fixed((1, 0))
    exact = 1.0 - oracle.transient(tree, 1.0, 1.0)[0]
    n = 20000
    est = A.estimate_survival(tree, 1.0, n, 1.0, seed=2)
    assert abs(est.value - exact) <= 3 * math.sqrt(exact * (1 - exact) / n)


def test_survival_monotone_under_common_numbers():
    lams = [0.3, 0.6, 0.9, 1.2]
    ests, rows = A.survival_curve(GW(Constant(2)), lams, 300, 5.0, mass_cap=2000, seed=3)
    rank = {"Extinct": 0}
    for r in rows:
        alive = [x != "Extinct" for x in r]
        assert all(a <= b for a, b in zip(alive, alive[1:]))
    vals = [e.value for e in ests]
    assert vals == sorted(vals)


def test_wilson_interval_contains_value():
    for k, n in [(0, 10), (3, 10), (10, 10), (500, 1000)]:
        e = A.proportion(k, n)
        assert e.lo <= e.value <= e.hi


def test_wilson_coverage_two_vertex():
    """Wilson intervals cover the exact survival probability in >= 93 of 100 repeats."""
    tree = Fixed((1, 0))
    exact = 1.0 - oracle.transient(tree, 1.0, 1.0)[0]
    covered = 0
    for i in range(100):
        est = A.estimate_survival(tree, 1.0, 400, 1.0, seed=1000 + i)
        covered += est.lo <= exact <= est.hi
    assert covered >= 93


# -- growth --------------------------------------------------------------

def test_growth_no_survivors():
    with pytest.raises(A.DegenerateResult, match="no survivors"):
        A.estimate_growth_rate(GW(Constant(2)), 0.0, 50, 10, 1.0, seed=0)


def test_growth_positive_and_consistent():
    g = A.estimate_growth_rate(GW(Constant(2)), 1.0, 150, 6, 1.0, seed=4, mass_cap=10 ** 6)
    assert g.epoch.lo > 0
    assert g.epoch.lo <= g.doubling.hi and g.doubling.lo <= g.epoch.hi


def test_growth_epoch_halving():
    a = A.estimate_growth_rate(GW(Constant(2)), 1.0, 150, 6, 1.0, seed=5, mass_cap=10 ** 6)
    b = A.estimate_growth_rate(GW(Constant(2)), 1.0, 150, 12, 0.5, seed=5, mass_cap=10 ** 6)
    assert a.epoch.lo <= b.epoch.hi and b.epoch.lo <= a.epoch.hi


# -- u(n) and beta -------------------------------------------------------

P234 = Periodic((2, 3, 4))


def test_u_zero_is_one():
    assert A.estimate_u(P234, 0.8, 0, 100, 20.0, seed=0).value == 1.0


def test_u_zero_rate():
    assert A.estimate_u(P234, 0.0, 3, 100, 20.0, seed=0).value == 0.0


def test_u_requires_periodic():
    with pytest.raises(ValueError):
        A.estimate_u(GW(Constant(2)), 1.0, 1, 10, 5.0)


def test_u_negative_levels():
    u = A.estimate_u_many(P234, 0.9, (-3, 0, 3), 400, 20.0, seed=6, mass_cap=10 ** 4)
    assert u[0].value == 1.0
    assert 0 < u[-3].value < 1 and 0 < u[3].value < 1


def test_beta_zero_rate_degenerate():
    assert A.estimate_beta(P234, 0.0, [1, 2, 3], 50, 10.0, seed=0).degenerate


def test_beta_sup_form_below_slope_form():
    b = A.estimate_beta(P234, 0.5, [1, 2, 3], 3000, 30.0, seed=7, mass_cap=3000)
    assert not b.degenerate
    se = b.value * b.se_log
    assert b.sup_form <= b.value + 3 * se


def test_beta_monotone_in_lambda():
    vals = [A.estimate_beta(P234, lam, [1, 2, 3], 2000, 30.0, seed=8, mass_cap=3000) for lam in (0.5, 0.6)]
    assert not any(v.degenerate for v in vals)
    assert vals[1].value >= vals[0].value - 3 * (vals[0].value * vals[0].se_log + vals[1].value * vals[1].se_log)


def test_beta_needs_three_points():
    with pytest.raises(ValueError):
        A.estimate_beta(P234, 1.0, [1, 2], 10, 5.0)


# -- closed forms --------------------------------------------------------

def test_beta_bounds():
    assert A.beta_bounds(1.0, 1, 2) == pytest.approx((0.5, 0.5))
    lo, hi = A.beta_bounds(1.0, 3, 24)
    assert lo == pytest.approx(0.125) and hi == pytest.approx(1 / 24)
    assert A.beta_bounds(0.0, 3, 24)[0] == 0.0
    with pytest.raises(ValueError):
        A.beta_bounds(1.0, 1, 1)


def test_rho_critical():
    assert A.rho_critical(1, 2) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert A.rho_critical(3, 24) == pytest.approx(24 ** (-1 / 6), abs=1e-12)
    assert A.rho_critical(3, 24) == pytest.approx(0.58880, abs=1e-5)
    with pytest.raises(ValueError):
        A.rho_critical(1, 1)


def sphere_sum_bfs(d, rho, n):
    """Sum of rho**level over the sphere of radius n around the root of the regular tree."""
    t = LazyTree(Periodic((d,)), 0)
    dist = {0: 0}
    queue = [0]
    for v in queue:
        if dist[v] == n:
            continue
        nbrs = list(t.realize_children(v))
        p = t.parent(v)
        if p is None:
            p = t.realize_parent(v)
        nbrs.append(p)
        for w in nbrs:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return math.fsum(rho ** t.level(v) for v, k in dist.items() if k == n)


def test_alpha_n_examples():
    assert A.alpha_n(0.3, 3, 0) == 1.0
    assert A.alpha_n(0.5, 4, 1) == pytest.approx(4.0, abs=1e-12)
    assert A.alpha_n(0.5, 4, 2) == pytest.approx(11.0, abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_alpha_n_matches_bfs(d):
    for rho in (0.3, 1 / math.sqrt(d), 0.7):
        for n in range(5):
            assert A.alpha_n(rho, d, n) == pytest.approx(sphere_sum_bfs(d, rho, n), rel=1e-12, abs=1e-12)


def test_block_weight():
    assert A.block_weight_bound(0.5, 24, 0) == pytest.approx(48.0)
    assert A.block_weight_exact((2, 3, 4), 0.5) == pytest.approx(3.5)
    assert A.block_weight_exact((2, 3, 4), 0.5) <= A.block_weight_bound(0.5, 24, 0)
    assert A.block_weight_bound(0.5, 30, 2) > A.block_weight_bound(0.5, 24, 2)
    with pytest.raises(ValueError):
        A.block_weight_bound(1.0, 24, 0)


def test_alpha_k_bound():
    assert A.alpha_k_bound(1.0, 1.0, 1) == pytest.approx(0.125, abs=1e-15)
    assert A.alpha_k_bound(1.0, 0.0, 1) == 0.0
    assert A.alpha_k_bound(1.0, 0.5, 1) == pytest.approx(0.015625, abs=1e-15)


def test_frontier_trial_beats_alpha_k():
    topo = GW(FiniteSupport(((1, 0.5), (3, 0.5))))
    lam, k = 1.5, 1
    est = A.frontier_trial(topo, lam, k, 4000, seed=9)
    bound = A.alpha_k_bound(lam, 0.5, k)
    se = math.sqrt(max(est.value * (1 - est.value), 1e-12) / est.n)
    assert est.value >= bound - 3 * se


def test_pushback_failure_examples():
    assert A.pushback_failure("ExponentialTail", 1.0, 1, 1.0) == pytest.approx(math.exp(-0.5 * math.e), abs=1e-12)
    sub = [A.pushback_failure("Subexponential", 1.0, k, 1.0, mu=1.2, alpha=0.5) for k in (10, 20, 40)]
    assert sub[0] > sub[1] > sub[2] and sub[2] < 1e-6
    lam, C = 0.3, 1.0
    assert math.log(lam / (1 + lam)) + C * lam * lam < 0
    vals = [A.pushback_failure("ExponentialTail", lam, k, C) for k in range(10, 81, 10)]
    assert min(vals) >= vals[0] > 0.5


def test_pushback_failure_domain():
    with pytest.raises(ValueError):
        A.pushback_failure("Subexponential", 1.0, 10, 1.0, mu=2.0, alpha=1.5)
    with pytest.raises(ValueError):
        A.pushback_failure("ExponentialTail", 1.0, 10, 0.0)


def test_recursion_fixed_point_examples():
    assert A.recursion_fixed_point(0.5, 1.0, 2.0) is None
    assert A.recursion_fixed_point(1.0, 1.0, 2.0) == pytest.approx(1.0, abs=1e-12)
    assert A.recursion_fixed_point(0.9, 1.0, 2.0) == pytest.approx(8 / 9, abs=1e-12)


def test_comparison_mean_offspring():
    assert A.comparison_mean_offspring(100, 1.0, 0.0) == 0.0
    v = 100 * math.exp(-2) * (1 - math.exp(-1)) * 0.25
    assert A.comparison_mean_offspring(100, 1.0, 0.5) == pytest.approx(v, abs=1e-12)
    assert v == pytest.approx(2.138705, abs=1e-6)
    assert A.smallest_k(1.0, 0.5) == 47


def test_q0_bound_formula():
    a, l0 = 0.5, 1.0
    assert A.q0_bound(l0, a) == pytest.approx(math.exp(-4) * (math.exp(-2) - math.exp(-4)))


# -- supermartingale -----------------------------------------------------

def test_supermartingale_zero_rate():
    t0 = 1.0
    sm = A.supermartingale_diagnostic(P234, 0.0, A.rho_critical(3, 24), t0, 2000, seed=10)
    for est in sm.per_type:
        assert est.lo <= math.exp(-t0) <= est.hi


def test_supermartingale_monotone():
    rho = A.rho_critical(3, 24)
    a = A.supermartingale_diagnostic(P234, 0.2, rho, 3.0, 1000, seed=11, mass_cap=10 ** 4).estimate
    b = A.supermartingale_diagnostic(P234, 0.6, rho, 3.0, 1000, seed=11, mass_cap=10 ** 4).estimate
    assert b.value >= a.value - 3 * math.hypot(a.se, b.se)


# -- bisection -----------------------------------------------------------

def test_bisect_synthetic():
    res = A.bisect_critical(None, lambda lam: lam >= 0.37, (0.0, 1.0), 2 ** -10)
    lo, hi = res.bracket
    assert lo < 0.37 <= hi and hi - lo <= 2 ** -10


def test_bisect_needs_straddling_bracket():
    with pytest.raises(A.BracketError):
        A.bisect_critical(None, lambda lam: True, (0.0, 1.0), 0.1)
    with pytest.raises(A.BracketError):
        A.bisect_critical(None, lambda lam: False, (0.0, 1.0), 0.1)


def test_weak_indicator_fails_below_branching_bound():
    ind = A.WeakSurvival(max_time=50.0, mass_cap=10 ** 4)
    for lam in (0.1, 0.2):
        ok, est = ind.evaluate(GW(Constant(4)), lam, 2000, seed=12)
        assert not ok


def test_weak_indicator_passes_high():
    ok, _ = A.WeakSurvival(max_time=30.0, mass_cap=2000).evaluate(GW(Constant(2)), 2.0, 300, seed=13)
    assert ok


# -- correlation ---------------------------------------------------------

def test_correlation_zero_rate():
    est = A.correlation_check(GWPlus(Constant(3)), 0.0, 300, seed=14)
    assert est.value == 0.0


def _independent_events(seed):
    g = np.random.default_rng(list(seed))
    return bool(g.random() < 0.3), bool(g.random() < 0.6)


def test_correlation_independent_control():
    est = A.correlation_check(None, 0.0, 4000, seed=15, events=_independent_events)
    assert est.lo <= 0.0 <= est.hi


def test_correlation_nonnegative():
    est = A.correlation_check(GWPlus(Constant(3)), 1.0, 3000, seed=16)
    assert est.value >= -3 * est.se


def test_visits_convention():
    ivs = [(0.0, 0.4), (1.0, 1.2), (2.0, 5.0)]
    assert A._visits(ivs, 1, 0.0) == [0.0]
    assert A._visits(ivs, 3, 0.5) == [1.0, 2.0, 2.5]
