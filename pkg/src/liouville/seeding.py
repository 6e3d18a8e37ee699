"""Counter-based seed splitting and replica scheduling.

A child seed is a pure function of ``(master, stream, index)`` so replicas can
be computed in any order, on any number of workers, and merged by index.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor

import numpy as np

SCHEME = "SeedSequence(entropy=master, spawn_key=(crc32(stream), index))"


def child_seed(master, stream, index=0):
    """Derive a 63-bit seed for replica ``index`` of a named ``stream``."""
    key = (zlib.crc32(str(stream).encode()), int(index))
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def child_seeds(master, stream, count):
    return [child_seed(master, stream, i) for i in range(count)]


def rng(seed):
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def resolve_workers(workers=None):
    """Worker count from the argument, else ``LQG_WORKERS``, else 1."""
    if workers is None:
        env = os.environ.get("LQG_WORKERS")
        workers = int(env) if env else 1
    return max(1, int(workers))


def map_replicas(func, args, workers=None):
    """Apply ``func`` to every item of ``args`` and return results in order.

    With more than one worker a bounded process pool is used; results are
    still returned in input order so downstream aggregation is independent of
    scheduling.
    """
    args = list(args)
    workers = resolve_workers(workers)
    if workers == 1 or len(args) <= 1:
        return [func(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, args, chunksize=max(1, len(args) // (4 * workers))))
