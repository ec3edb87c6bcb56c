"""Compare the compiled and pure-Python event kernels.

    python3 benchmarks/bench_backends.py [--events N] [--repeat R]

Both kernels run the same seeded workloads; the script checks that they end
in the same state and prints events per second and the speed-up.
"""
import argparse
import time

from treecp import _pykernel, engine as E, trees as T
from treecp.trees import Constant, GW, LazyTree, Periodic

try:
    from treecp import _ckernel
except ImportError:
    _ckernel = None

WORKLOADS = [
    ("GW(const 2), lam=2", GW(Constant(2)), (2.0,)),
    ("Periodic(2,3,4), lam=0.8", Periodic((2, 3, 4)), (0.8,)),
    ("GW(const 3) coupled 1/0.8", GW(Constant(3)), (1.0, 0.8)),
]


def run_workload(mod, topo, lams, events):
    """Run seeds 0, 1, ... until ``events`` events have been applied in total."""
    E.Ladder, T.Arena = mod.Ladder, mod.Arena
    total, elapsed, finals, seed = 0, 0.0, [], 0
    while total < events:
        state = E.ProcessState(LazyTree(topo, seed), lams, seed=seed)
        start = time.perf_counter()
        E.run(state, E.StopCondition(max_events=events - total, max_infected=10 ** 5))
        elapsed += time.perf_counter() - start
        st = state.ladder.state()
        total += st["events"]
        finals.append(st)
        seed += 1
    return elapsed, total, finals


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernel is None:
        print("compiled kernel not built; nothing to compare")
        return
    saved = E.Ladder, T.Arena
    try:
        print(f"{'workload':30s} {'python ev/s':>12s} {'cython ev/s':>12s} {'speed-up':>9s}")
        for name, topo, lams in WORKLOADS:
            best = {}
            for label, mod in (("py", _pykernel), ("c", _ckernel)):
                runs = [run_workload(mod, topo, lams, args.events) for _ in range(args.repeat)]
                best[label] = (min(r[0] for r in runs), runs[0][1], runs[0][2])
            if best["py"][2] != best["c"][2]:
                raise SystemExit(f"{name}: kernels disagree")
            ev = best["c"][1]
            py, c = ev / best["py"][0], ev / best["c"][0]
            print(f"{name:30s} {py:12.0f} {c:12.0f} {c / py:8.1f}x")
    finally:
        E.Ladder, T.Arena = saved


if __name__ == "__main__":
    main()
