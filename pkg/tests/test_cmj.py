import math

import numpy as np
import pytest

from treecp import cmj
from treecp import trees as T
from treecp.trees import BinomialLaw, Constant, FiniteSupport, GW

GOLDEN = -math.log((math.sqrt(5) - 1) / 2)


def test_malthusian_examples():
    assert cmj.malthusian(cmj.ReproductionMeasure(((1.0, 2.0),))) == pytest.approx(math.log(2), abs=1e-10)
    assert cmj.malthusian(cmj.ReproductionMeasure(((1.0, 1.0),))) == 0.0
    c = cmj.malthusian(cmj.ReproductionMeasure(((1.0, 1.0), (2.0, 1.0))))
    assert c == pytest.approx(GOLDEN, abs=1e-8)
    assert GOLDEN == pytest.approx(0.48121, abs=1e-5)


@pytest.mark.parametrize("atoms", [((0.5, 3.0),), ((1.0, 0.4), (3.0, 0.2)), ((0.1, 0.5), (0.2, 0.5), (9.0, 5.0)),
                                   ((2.0, 50.0),)])
def test_malthusian_residual(atoms):
    m = cmj.ReproductionMeasure(atoms)
    c = cmj.malthusian(m)
    assert abs(m.laplace(c) - 1.0) <= 1e-10
    # strictly decreasing in c: the root is bracketed by sign changes
    assert m.laplace(c - 0.1) > 1.0 > m.laplace(c + 0.1)


def test_malthusian_empty():
    with pytest.raises(ValueError):
        cmj.malthusian(cmj.ReproductionMeasure(()))


def test_measure_validation():
    with pytest.raises(ValueError):
        cmj.ReproductionMeasure(((2.0, 1.0), (1.0, 1.0)))
    with pytest.raises(ValueError):
        cmj.ReproductionMeasure(((0.0, 1.0),))


def test_no_offspring_dies_out():
    spec = cmj.CmjSpec(FiniteSupport(((0, 1.0),)), 1.0, 5.0)
    tr = cmj.simulate_cmj(spec, 3.0, seed=0, sample_times=(0.0, 0.5, 0.99, 1.5, 3.0))
    assert tr.Z == (1, 1, 1, 0, 0) and tr.extinct


def test_birth_after_deadline_means_no_offspring():
    spec = cmj.CmjSpec(Constant(3), 2.0, 1.0)
    tr = cmj.simulate_cmj(spec, 3.0, seed=0, sample_times=(0.5, 1.5))
    assert tr.Z == (1, 0) and tr.extinct


def test_generation_means():
    spec = cmj.CmjSpec(BinomialLaw(4, 0.5), 1.0, 5.0)
    times = tuple(j + 0.5 for j in range(5))
    Z = np.array([cmj.simulate_cmj(spec, 5.0, seed=(1, r), sample_times=times).Z for r in range(3000)], dtype=float)
    for j in range(5):
        se = Z[:, j].std(ddof=1) / math.sqrt(len(Z))
        assert abs(Z[:, j].mean() - 2 ** j) <= 3 * se + 1e-12


def test_growth_exponent_matches_malthusian():
    sample = tuple(np.linspace(0.5, 1.5, 11))
    spec = cmj.CmjSpec(Constant(2), sample, 10.0)
    c = cmj.malthusian(spec.measure())
    t1, t2 = 5.0, 7.0
    Z = np.array([cmj.simulate_cmj(spec, t2, seed=(2, r), sample_times=(t1, t2), max_pop=10 ** 6).Z
                  for r in range(400)], dtype=float)
    a, b = Z[:, 0], Z[:, 1]
    ratio = b.mean() / a.mean()
    # delta-method standard error of log(mean b / mean a)
    psi = b / b.mean() - a / a.mean()
    se = psi.std(ddof=1) / math.sqrt(len(psi)) / (t2 - t1)
    est = math.log(ratio) / (t2 - t1)
    assert abs(est - c) <= 3 * se


def test_extinction_matches_thinned_fixed_point():
    sample = tuple([0.5, 1.0, 1.5, None, 3.0])
    spec = cmj.CmjSpec(BinomialLaw(3, 0.6), sample, 2.0)
    q = T.extinction_fixed_point(spec.thinned_law())
    n = 10000
    ext = sum(cmj.simulate_cmj(spec, 1e9, seed=(3, r), sample_times=(), max_pop=300).extinct for r in range(n))
    assert abs(ext / n - q) <= 3 * math.sqrt(q * (1 - q) / n)


def test_limit_subcritical():
    spec = cmj.CmjSpec(BinomialLaw(2, 0.3), 1.0, 5.0)
    trs = [cmj.simulate_cmj(spec, 60.0, seed=(4, r), sample_times=np.linspace(0, 60, 13)) for r in range(300)]
    c = cmj.malthusian(spec.measure())
    s = cmj.limit_diagnostic(trs, c)
    assert s.p_positive == 0.0 and s.p_extinct == 1.0


def test_limit_deterministic_bounded():
    spec = cmj.CmjSpec(Constant(2), 1.0, 5.0)
    c = cmj.malthusian(spec.measure())
    times = np.linspace(0.25, 10.25, 21)
    tr = cmj.simulate_cmj(spec, 10.5, seed=0, sample_times=times)
    s = cmj.limit_diagnostic([tr], c)
    assert all(math.exp(-c) - 1e-12 <= w <= 1 + 1e-12 for w in s.w_mean)


def test_limit_stabilizes():
    spec = cmj.CmjSpec(BinomialLaw(3, 0.6), 1.0, 5.0)
    c = cmj.malthusian(spec.measure())
    times = np.arange(0.5, 12.0, 1.0)
    trs = [cmj.simulate_cmj(spec, 12.0, seed=(5, r), sample_times=times, max_pop=10 ** 6) for r in range(400)]
    s = cmj.limit_diagnostic(trs, c)
    assert s.survivors > 50
    assert s.var_late < s.var_early


# -- comparison process --------------------------------------------------

def test_comparison_zero_rate():
    cs = cmj.extract_comparison(GW(Constant(3)), 0.0, 2, 10.0, 50, seed=0)
    assert cs.success_rate.value == 0.0


def test_comparison_success_bound():
    cs = cmj.extract_comparison(GW(Constant(3)), 1.0, 3, 10.0, 1500, seed=6)
    assert cs.success_rate.value >= cmj.success_lower_bound(1.0) - 3 * cs.success_rate.se


def test_comparison_offspring_mean_bound():
    k, lam = 3, 1.0
    cs = cmj.extract_comparison(GW(Constant(3)), lam, k, 10.0, 1500, seed=7)
    m = cs.offspring_mean
    assert m.value >= k * cmj.success_lower_bound(lam) * cs.p_reached.value - 3 * m.se


def test_comparison_pairwise_independence():
    cs = cmj.extract_comparison(GW(Constant(3)), 1.0, 3, 10.0, 2000, seed=8)
    cov = cs.pair_covariance
    assert cov.lo <= 0.0 <= cov.hi


def test_comparison_law():
    law = cmj.comparison_offspring_law(10, 1.0)
    assert law.mean() == pytest.approx(10 * math.exp(-2) * (1 - math.exp(-1)))
