"""The compiled and pure-Python kernels must produce bit-identical runs."""
import pytest

from treecp import _codes, _pykernel, rng
from treecp import engine as E
from treecp import trees as T
from treecp.trees import Constant, Fixed, GeometricShifted, GW, GWPlus, LazyTree, Periodic, PoissonConditioned

ck = pytest.importorskip("treecp._ckernel")


def test_codes_agree():
    for name, value in ck.CODES.items():
        assert getattr(_codes, name) == value, name


@pytest.fixture
def use_kernel(monkeypatch):
    def switch(mod):
        monkeypatch.setattr(E, "Ladder", mod.Ladder)
        monkeypatch.setattr(T, "Arena", mod.Arena)
    return switch


def _run(topo, lams, seed, stop, restriction=None):
    tree = LazyTree(topo, seed)
    state = E.ProcessState(tree, lams, restriction, seed, check=True)
    outs = E.run_levels(state, stop, epoch=0.25, rhos=(0.5, 0.7), doubling=True)
    arena = tree.arena
    shape = [arena.vertex(v) for v in range(arena.n)]
    return repr(outs), state.ladder.state(), shape


CASES = [
    (GW(Constant(3)), [1.0, 0.8], E.StopCondition(max_events=4000), None),
    (GW(GeometricShifted(0.4)), [1.5, 1.2, 0.3], E.StopCondition(max_time=3.0, max_infected=400), None),
    (Periodic((2, 3, 4)), [0.8, 0.5], E.StopCondition(max_time=6.0, reinfection_target=(5, 0.5)), None),
    (Periodic((1, 3)), [1.2], E.StopCondition(max_time=6.0, root_reentries=5), None),
    (GWPlus(PoissonConditioned(2.0)), [1.0, 0.9], E.StopCondition(max_time=10.0, frontier_target=30), None),
    (Fixed((2, 2, 1, 0, 0, 0)), [2.0, 1.0], E.StopCondition(max_time=3.0), None),
    (GW(Constant(2)), [2.0], E.StopCondition(max_time=4.0), E.Ball(0, 3)),
    (Periodic((2, 3)), [1.5, 1.0], E.StopCondition(max_time=4.0, max_infected=300), E.SubtreePlusBranch(0)),
]


@pytest.mark.parametrize("case", range(len(CASES)))
def test_bit_identical(use_kernel, case):
    topo, lams, stop, restr = CASES[case]
    for seed in range(4):
        use_kernel(_pykernel)
        a = _run(topo, lams, (seed, case), stop, restr)
        use_kernel(ck)
        b = _run(topo, lams, (seed, case), stop, restr)
        assert a == b
        assert a[1]["violations"] == 0


def test_uniform_streams_match_numpy():
    seed = (123, 4)
    gen = rng.make_generator(123, 4, rng.STRUCTURE)
    expect = gen.random(64 + 128 + 10).tolist()
    for mod in (_pykernel, ck):
        arena = mod.Arena(_codes.GW, rng.factory(seed, rng.STRUCTURE), (1.0,), (2,))
        got = [arena.uniform() for _ in range(len(expect))]
        assert got == expect


def test_backend_choice():
    from treecp import _backend
    assert _backend.BACKEND in ("cython", "python")
