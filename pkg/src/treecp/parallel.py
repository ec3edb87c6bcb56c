"""Replication fan-out.

Replication ``r`` of a job always uses the streams keyed by (seed, r), and
results are returned in replication order, so the output does not depend on
the number of workers. Workers are processes: the kernels hold the GIL.
"""
import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial

CHUNK = 256


def resolve_threads(threads=None):
    if threads is None:
        threads = int(os.environ.get("TREECP_THREADS", "1") or 1)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def _run_chunk(fn, seed, kwargs, lo, hi):
    return [fn((seed, r), **kwargs) for r in range(lo, hi)]


def replicate(fn, reps, seed, threads=None, chunk=CHUNK, **kwargs):
    """Return ``[fn((seed, r), **kwargs) for r in range(reps)]``.

    ``fn`` must be a module-level function when more than one worker is used.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    threads = resolve_threads(threads)
    if threads == 1 or reps <= chunk:
        return _run_chunk(fn, seed, kwargs, 0, reps)
    bounds = [(lo, min(lo + chunk, reps)) for lo in range(0, reps, chunk)]
    job = partial(_run_chunk, fn, seed, kwargs)
    out = []
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for part in pool.map(job, [b[0] for b in bounds], [b[1] for b in bounds]):
            out.extend(part)
    return out
