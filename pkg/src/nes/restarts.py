"""Restart scheduling: successive independent runs on geometrically shrinking budget slices."""

from dataclasses import dataclass, replace
import math
from typing import Callable, Tuple

import numpy as np

__all__ = ["RestartSchedule", "schedule_slices", "boosted_success", "run_seeds",
           "interleaved_runner"]


@dataclass(frozen=True)
class RestartSchedule:
    """Run ``i`` (from 1) gets ``round(p (1 - p)^(i-1) total_budget)`` evaluations.

    The list stops before the first slice that would fall below ``min_slice``.
    """

    p: float
    total_budget: int
    min_slice: int
    slices: Tuple[int, ...]

    def __len__(self):
        return len(self.slices)


def schedule_slices(p, total_budget, min_slice=1):
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if total_budget <= 0:
        raise ValueError("total_budget must be positive")
    slices = []
    used = 0
    i = 0
    while True:
        s = int(round(p * (1.0 - p) ** i * total_budget))
        if s < max(min_slice, 1) or used + s > total_budget:
            break
        slices.append(s)
        used += s
        i += 1
        if p == 1.0:
            break
    return RestartSchedule(float(p), int(total_budget), int(min_slice), tuple(slices))


def boosted_success(success_prob: Callable[[float], float], p, total_budget, min_slice=1):
    """Probability that at least one run of the schedule succeeds.

    ``success_prob(t)`` is the chance that one run succeeds within ``t`` evaluations.
    """
    sched = schedule_slices(p, total_budget, min_slice)
    fail = 1.0
    for t in sched.slices:
        fail *= 1.0 - success_prob(t)
    return 1.0 - fail


def run_seeds(master_seed, n):
    """Distinct, platform-stable integer seeds for runs ``0..n-1``.

    Run ``i`` uses ``SeedSequence(master_seed, spawn_key=(i,))``.
    """
    return [int(np.random.SeedSequence(master_seed, spawn_key=(i,)).generate_state(1, np.uint64)[0])
            for i in range(n)]


def interleaved_runner(run_factory, schedule, seed, minimize=True):
    """Execute one independently seeded run per slice until one reaches its target.

    ``run_factory(budget, seed)`` must return a result with ``success``,
    ``best_fitness`` and ``evaluations`` attributes. Runs are executed
    sequentially with their slice as hard budget; this is outcome-equivalent to
    suspending and resuming them. The best run is chosen by success, then best
    fitness, then lowest index. The returned object is that run with
    ``evaluations`` replaced by the total spent over all runs and ``runs``
    holding every run.
    """
    seeds = run_seeds(seed, len(schedule.slices))
    runs = []
    total = 0
    for budget, s in zip(schedule.slices, seeds):
        result = run_factory(budget, s)
        runs.append(result)
        total += result.evaluations
        if result.success:
            break
    if not runs:
        raise ValueError("schedule has no slices")

    def key(item):
        i, r = item
        f = r.best_fitness
        if f is None or math.isnan(f):
            f = math.inf if minimize else -math.inf
        return (not r.success, f if minimize else -f, i)

    _, best = min(enumerate(runs), key=key)
    try:
        return replace(best, evaluations=total, runs=runs)
    except TypeError:
        return best
