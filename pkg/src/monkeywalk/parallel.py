"""Replica fan-out with per-replica random streams.

Replica ``i`` of a run seeded with ``seed`` always draws from
``SeedSequence(seed, spawn_key=(i,))``, so results never depend on how the
replicas are split between workers.
"""
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np


def replica_rng(seed, i):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(i),))))


def default_workers():
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def _chunk(fn, payload, seed, idx):
    out = []
    for i in idx:
        try:
            out.append(fn(payload, replica_rng(seed, i)))
        except Exception as exc:
            raise RuntimeError(f"replica {i} failed: {exc!r}") from exc
    return out


def map_replicas(fn, payload, replicas, seed, workers=1, chunk=None):
    """[fn(payload, rng_i) for i in range(replicas)], optionally in processes.

    ``fn`` must be a module-level function so it can be pickled.
    """
    idx = np.arange(replicas)
    workers = max(1, int(workers or 1))
    if workers == 1 or replicas < 2:
        return _chunk(fn, payload, seed, idx)
    chunk = chunk or max(1, -(-replicas // (4 * workers)))
    parts = [idx[k:k + chunk] for k in range(0, replicas, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        res = ex.map(_chunk, [fn] * len(parts), [payload] * len(parts), [seed] * len(parts), parts)
        return [r for part in res for r in part]


def aux_rng(seed, tag):
    """Stream for draws that belong to no replica (limit samples and such)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(2**32 + int(tag),))))
