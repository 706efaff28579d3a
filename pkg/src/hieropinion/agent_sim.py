"""Kinetic Monte Carlo engine for the pairwise interaction process.

One encounter picks an unordered pair of distinct agents uniformly at random; both
members update from the pair's pre-encounter opinions. Each encounter advances the
model clock by ``1 / agents``, so every agent takes part in two encounters per unit
of model time on average. Consequently one unit of grazing time ``tau = gamma * t``
in this engine corresponds to two units of the mean-field time used by
:mod:`hieropinion.meanfield` and :mod:`hieropinion.quantile_solver`
(see :data:`MEANFIELD_TIME_FACTOR`).

Randomness inside the compiled kernel comes from a xoshiro256** stream owned by the
run (see :mod:`hieropinion._rng`); a run is fully determined by its seed.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from . import _rng
from .model import ModelConfig, Population, build_population, interact
from .timeseries import TimeSeries, ensemble_mean

# mean-field time elapsed per unit of engine grazing time
MEANFIELD_TIME_FACTOR = 2.0


@dataclass(frozen=True)
class SimSchedule:
    t_end: float
    record_every: float
    rescale_time: bool = True

    def __post_init__(self):
        if self.t_end < 0 or self.record_every <= 0:
            raise ValueError("t_end must be >= 0 and record_every > 0")

    def model_time(self, t: float, gamma: float) -> float:
        return t / gamma if self.rescale_time else t


def dynamics_state(seed: int) -> np.ndarray:
    """Kernel RNG state, independent of the population-construction stream."""
    mixed = np.random.SeedSequence([int(seed), 0x5EED]).generate_state(2, dtype=np.uint64)
    return _rng.make_state(int(mixed[0]) ^ (int(mixed[1]) << 1))


@njit(cache=True)
def _advance(state, w, level, stubborn, p, gamma, n_encounters):
    n = w.size
    for _ in range(n_encounters):
        i = _rng.below(state, n)
        j = _rng.below(state, n - 1)
        if j >= i:
            j += 1
        wi = w[i]
        wj = w[j]
        li = level[i]
        lj = level[j]
        # a uniform draw is consumed only when a lower-ranked partner may convince
        ui = _rng.uniform(state) if (lj < li and not stubborn[i]) else 1.0
        uj = _rng.uniform(state) if (li < lj and not stubborn[j]) else 1.0
        w[i] = interact(wi, wj, li, lj, stubborn[i], p, gamma, ui)
        w[j] = interact(wj, wi, lj, li, stubborn[j], p, gamma, uj)


def encounter(pop: Population, rng: np.random.Generator) -> tuple[int, int]:
    """Perform a single encounter in place and return the chosen pair."""
    n = pop.size
    if n < 2:
        raise ValueError("an encounter needs at least two agents")
    i, j = rng.choice(n, size=2, replace=False)
    cfg = pop.config
    wi, wj = pop.w[i], pop.w[j]
    li, lj = pop.level[i], pop.level[j]
    hi, hj = cfg.levels[li].h, cfg.levels[lj].h
    ui, uj = rng.random(2)
    pop.w[i] = interact(wi, wj, hi, hj, bool(pop.stubborn[i]), cfg.p, cfg.gamma, ui)
    pop.w[j] = interact(wj, wi, hj, hi, bool(pop.stubborn[j]), cfg.p, cfg.gamma, uj)
    pop.encounters += 1
    pop.clock = pop.encounters / n
    return int(i), int(j)


def level_stats(pop: Population) -> dict[str, np.ndarray]:
    """Per-level statistics; ``mean_ns``/``var_ns``/``support_ns`` are NaN for levels
    without non-stubborn agents."""
    n = pop.config.n_levels
    out = {k: np.full(n, np.nan) for k in ("mean_ns", "var_ns", "support_ns", "mean_all")}
    out["count_ns"] = np.zeros(n, dtype=np.int64)
    out["count_s"] = np.zeros(n, dtype=np.int64)
    for i in range(n):
        in_level = pop.level == i
        w_level = pop.w[in_level]
        w_ns = w_level[~pop.stubborn[in_level]]
        out["count_ns"][i] = w_ns.size
        out["count_s"][i] = w_level.size - w_ns.size
        if w_level.size:
            out["mean_all"][i] = w_level.mean()
        if w_ns.size:
            out["mean_ns"][i] = w_ns.mean()
            out["var_ns"][i] = w_ns.var()
            out["support_ns"][i] = w_ns.max() - w_ns.min()
    return out


def _record_points(sched: SimSchedule, gamma: float, n_agents: int) -> tuple[np.ndarray, np.ndarray]:
    """Encounter counts at which to record, and the matching schedule times."""
    n_rec = int(math.floor(sched.t_end / sched.record_every + 1e-9))
    marks = [k * sched.record_every for k in range(n_rec + 1)]
    if sched.t_end - marks[-1] > 1e-9 * max(1.0, sched.t_end):
        marks.append(sched.t_end)
    counts = []
    for t in marks:
        k = int(math.ceil(sched.model_time(t, gamma) * n_agents - 1e-9))
        if not counts or k > counts[-1]:
            counts.append(k)
    counts = np.array(counts, dtype=np.int64)
    clock = counts / n_agents
    times = clock * gamma if sched.rescale_time else clock
    return counts, times


def run(pop: Population, sched: SimSchedule, seed: int) -> TimeSeries:
    """Advance ``pop`` in place until its clock reaches the schedule end.

    The population is assumed to start at clock 0; statistics are recorded at time 0,
    at every multiple of ``record_every`` and at ``t_end``.
    """
    cfg = pop.config
    counts, times = _record_points(sched, cfg.gamma, pop.size)
    ts = TimeSeries.empty_like(times, cfg.h)
    state = dynamics_state(seed)
    done = pop.encounters
    for k, target in enumerate(counts):
        if target > done:
            _advance(state, pop.w, pop.level, pop.stubborn, cfg.p, cfg.gamma, int(target - done))
            done = int(target)
        stats = level_stats(pop)
        for name in ("mean_ns", "var_ns", "support_ns", "mean_all"):
            getattr(ts, name)[k] = stats[name]
    pop.encounters = done
    pop.clock = done / pop.size
    ns, s = pop.level_counts()
    ts.weights = (ns + s).astype(float)
    ts.meta = {"count_ns": ns.tolist(), "count_s": s.tolist(), "seed": int(seed)}
    return ts


def _run_one(args) -> TimeSeries:
    config, sched, seed, exact = args
    pop = build_population(config, seed, exact=exact)
    return run(pop, sched, seed)


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("HIEROPINION_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_jobs))


def run_ensemble(
    config: ModelConfig,
    sched: SimSchedule,
    seeds: Sequence[int],
    exact: bool | None = None,
) -> tuple[list[TimeSeries], TimeSeries]:
    """Run one independent simulation per seed; return the runs and their mean."""
    jobs = [(config, sched, int(s), exact) for s in seeds]
    workers = worker_count(len(jobs))
    if workers == 1:
        runs = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    return runs, ensemble_mean(runs, keys=list(seeds))
