"""Non-spatial queueing comparators for the link dynamics.

The processor-sharing comparator treats the spectrum as one server of fixed
capacity split equally among all customers present, i.e. the spatial-fluid
view with all geometry removed.  It is normalised so that the stability
boundary coincides with the spatial model's critical rate and the mean
sojourn is mean_file / (capacity - lam): arrivals come at rate lam /
mean_file, the server drains capacity bits per unit time, and every
customer carries a file of the given distribution.  The workload recursion
is exact for any file-size law, so the same engine serves the exponential
and the Pareto comparisons.

The infinite-server comparator drops interference altogether: i.i.d.
exponential sojourns at the solo rate, a lower bound for the spatial
model's delays.
"""
from __future__ import annotations

import heapq
import math

import numpy as np

from .errors import ConfigError
from .rng import substream
from .simulator import FileSizeDist


def mm1_ps_comparator(lam: float, mean_file: float, capacity: float,
                      n_samples: int, seed: int = 0,
                      file_dist: FileSizeDist | None = None,
                      warmup_customers: int | None = None) -> np.ndarray:
    """Sojourn-time samples of the equal-split processor-sharing comparator.

    Stability needs lam < capacity; the exponential case is the classic
    single-server PS queue with mean sojourn mean_file / (capacity - lam).
    """
    if not lam < capacity:
        raise ConfigError(f"unstable comparator: lam={lam} >= capacity={capacity}")
    if lam <= 0:
        raise ConfigError("arrival rate must be > 0")
    if file_dist is None:
        file_dist = FileSizeDist("exponential", mean_file)
    if abs(file_dist.mean - mean_file) > 1e-9 * mean_file:
        raise ConfigError("file_dist mean must equal mean_file")
    if warmup_customers is None:
        warmup_customers = max(200, n_samples // 10)

    rng = substream(seed, 20)
    sampler = file_dist.sampler()
    arr_rate = lam / mean_file
    speed = capacity
    total = n_samples + warmup_customers

    # virtual-time construction: V grows at speed/n, a customer arriving at
    # virtual time V with work w departs when V reaches V + w, so the heap
    # of virtual finish times drives the dynamics exactly
    heap: list[tuple[float, float]] = []  # (virtual finish, birth time)
    sojourns = np.empty(total)
    done = 0
    arrived = 0
    now = 0.0
    vt = 0.0
    next_arrival = rng.exponential(1.0 / arr_rate)

    while done < total:
        n = len(heap)
        t_dep = now + (heap[0][0] - vt) * n / speed if n else math.inf
        if arrived < total and next_arrival <= t_dep:
            if n:
                vt += (next_arrival - now) * speed / n
            now = next_arrival
            heapq.heappush(heap, (vt + float(sampler(rng, 1)[0]), now))
            arrived += 1
            next_arrival = now + rng.exponential(1.0 / arr_rate)
        else:
            vt = heap[0][0]
            now = t_dep
            _, b = heapq.heappop(heap)
            sojourns[done] = now - b
            done += 1
    return sojourns[warmup_customers:]


def mminf_comparator(lam: float, mean_file: float, solo_rate: float,
                     n_samples: int, seed: int = 0) -> np.ndarray:
    """Interference-free sojourns: i.i.d. exponential with mean
    mean_file / solo_rate, a delay lower bound at any arrival rate."""
    if not solo_rate > 0:
        raise ConfigError("solo rate must be > 0")
    rng = substream(seed, 21)
    return rng.exponential(mean_file / solo_rate, n_samples)
