"""Local workload model of an Ant Routing node, plus resource estimators.

The per-task cost model charges ``alpha * log2(n)`` per look-up and
``beta * log2(n)`` per insertion in a bucket tree of ``n`` records, and
``gamma`` per record when a bucket is dropped.  With ``rate`` tasks per
second spread over 0.1 s buckets, a pheromone bucket holds ``rate / 10``
records.  :func:`lambda_max` finds the rate at which one second of load
takes one second of work.
"""
from __future__ import annotations

import gc
import math
import os
import random
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .seedstore import AvlTree

# Constants measured on the reference C implementation; hardware-bound.
REFERENCE_ALPHA = 0.7e-6
REFERENCE_BETA = 1.1e-6
REFERENCE_GAMMA = 8.2e-8
REFERENCE_LAMBDA_MAX = 12_500.0

PHEROMONE_RECORD_BYTES = 34
MATCH_RECORD_BYTES = 25
CONFIRMATION_RECORD_BYTES = 33
QUOTED_PHEROMONE_MESSAGE_BYTES = 16

CENTURY_SECONDS = 3600 * 24 * 31 * 12 * 100


class UnboundedRate(ArithmeticError):
    """No finite rate saturates the node below the search ceiling."""


# --------------------------------------------------------------------------
# Workload model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingParams:
    alpha: float = REFERENCE_ALPHA
    beta: float = REFERENCE_BETA
    gamma: float = REFERENCE_GAMMA
    lookups_per_task: float = 8
    matches_per_task: float = 1
    confirm_probability: float = 0.0
    rate: float = 1000.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "lookups_per_task", "confirm_probability"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.matches_per_task <= 0:
            raise ValueError("matches_per_task must be positive")
        if self.confirm_probability > 1:
            raise ValueError("confirm_probability must not exceed 1")


def task_time(p: ScalingParams, match_lookup_always: bool = False) -> float:
    """Average seconds of tree work for one routing task at ``p.rate``.

    The single match-tree look-up of a task happens while forwarding a
    confirmation, so by default it is weighted by ``confirm_probability``
    like the rest of the confirmation work.  ``match_lookup_always=True``
    charges it on every task instead.
    """
    if p.rate <= 10:
        raise ValueError("rate must exceed 10 tasks/s")
    a, b, m, c = p.alpha, p.beta, p.matches_per_task, p.confirm_probability
    per_bucket = p.rate / 10
    match_lookups = 1.0 if match_lookup_always else c
    t = (p.lookups_per_task * a + b) * math.log2(per_bucket)
    t += (match_lookups * a + m * b) * math.log2(m * per_bucket)
    if c > 0:
        t += c * (a + b) * math.log2(c * per_bucket)
    return t


def total_time(p: ScalingParams, match_lookup_always: bool = False) -> float:
    """Seconds of work per second of load, bucket cleaning included."""
    m, c = p.matches_per_task, p.confirm_probability
    return p.rate * (task_time(p, match_lookup_always) + p.gamma * (1 + m + c))


def lambda_max(p: ScalingParams, match_lookup_always: bool = False,
               ceiling: float = 1e9, rtol: float = 1e-6) -> float:
    """Largest rate whose :func:`total_time` stays at or below one second."""
    if p.alpha + p.beta <= 0 and p.gamma <= 0:
        raise UnboundedRate("all cost constants are zero")

    def excess(rate: float) -> float:
        return total_time(replace(p, rate=rate), match_lookup_always) - 1.0

    lo = 10.0 * (1 + 1e-9)
    if excess(lo) >= 0:
        raise ValueError("node is saturated already at 10 tasks/s")
    if excess(ceiling) < 0:
        raise UnboundedRate(f"no saturation below {ceiling:g} tasks/s")
    return brentq(excess, lo, ceiling, rtol=rtol, xtol=1e-9)


# --------------------------------------------------------------------------
# Memory, bandwidth, collisions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MemoryParams:
    rate: float
    lifetime: float = 2.0
    matches_received: float = 0
    pheromone_bytes: int = PHEROMONE_RECORD_BYTES
    match_bytes: int = MATCH_RECORD_BYTES
    confirmation_bytes: int = CONFIRMATION_RECORD_BYTES


def memory_estimate(p: MemoryParams) -> float:
    """Upper bound in bytes on seed memory: every live task holds one record
    of each kind plus one match record per match received."""
    per_task = p.pheromone_bytes + p.match_bytes * p.matches_received + p.confirmation_bytes
    return p.rate * p.lifetime * per_task


def memory_large_r(p: MemoryParams) -> float:
    """Match records only; the approximation for heavily connected nodes."""
    return p.rate * p.lifetime * p.match_bytes * p.matches_received


def memory_report(p: MemoryParams) -> dict:
    value = memory_estimate(p)
    warnings = []
    # the prose range quoted for small nodes (r <= 8) does not follow from the bound
    if p.matches_received <= 8 and not 2e6 <= value <= 4e6:
        warnings.append(f"bound {value / 1e6:.2f} MB lies outside the quoted 2-4 MB range for r <= 8")
    return {"rate": p.rate, "lifetime": p.lifetime, "matches_received": p.matches_received,
            "bytes": value, "megabytes": value / 1e6,
            "large_r_megabytes": memory_large_r(p) / 1e6, "warnings": warnings}


def bandwidth_estimate(rate: float, message_size: float) -> float:
    """Bytes per second to relay one pheromone message per task."""
    if rate < 0 or message_size < 0:
        raise ValueError("rate and message_size must be non-negative")
    return rate * message_size


@dataclass(frozen=True)
class CollisionParams:
    rate: float
    lifetime: float = 2.0
    seed_bits: int = 64
    horizon_seconds: float = CENTURY_SECONDS


@dataclass(frozen=True)
class CollisionEstimate:
    concurrent_seeds: float
    instantaneous: float
    probability: float
    outside_small_regime: bool


def collision_probability(p: CollisionParams, exact: bool = False) -> CollisionEstimate:
    """Birthday-bound collision risk among the seeds alive at one instant,
    compounded over ``horizon_seconds`` independent instants.

    The default uses ``n**2 / (2 N)``; ``exact=True`` uses the product form
    ``1 - prod(1 - i/N)``, which stays valid when ``n`` approaches ``sqrt(N)``.
    """
    if p.seed_bits <= 0:
        raise ValueError("seed_bits must be positive")
    n = p.rate * p.lifetime
    space = 2.0 ** p.seed_bits
    if exact:
        i = np.arange(int(round(n)), dtype=float)
        inst = -math.expm1(float(np.sum(np.log1p(-i / space))))
    else:
        inst = n * n / (2.0 * space)
    inst = min(inst, 1.0)
    if p.horizon_seconds <= 0:
        prob = 0.0
    elif inst >= 1.0:
        prob = 1.0
    else:
        prob = -math.expm1(p.horizon_seconds * math.log1p(-inst))
    return CollisionEstimate(n, inst, prob, n > 0.1 * 2.0 ** (p.seed_bits / 2))


def monte_carlo_collision(key_bits: int, draws: int, trials: int,
                          rng_seed: int = 0, chunk: int = 10_000) -> tuple[float, float]:
    """Fraction of trials in which ``draws`` uniform keys contain a repeat,
    and its standard error."""
    rng = np.random.default_rng(rng_seed)
    hits = 0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        keys = np.sort(rng.integers(0, 2 ** key_bits, size=(k, draws)), axis=1)
        hits += int(np.count_nonzero((np.diff(keys, axis=1) == 0).any(axis=1)))
        done += k
    p = hits / trials
    return p, math.sqrt(p * (1 - p) / trials)


# --------------------------------------------------------------------------
# Benchmark harness
# --------------------------------------------------------------------------

@dataclass
class LinearFit:
    slope: float
    intercept: float
    r2: float
    through_origin: float


def _fit(x: np.ndarray, y: np.ndarray) -> LinearFit:
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return LinearFit(float(slope), float(intercept), r2, float(np.dot(x, y) / np.dot(x, x)))


@dataclass
class BenchmarkResult:
    sizes: list[int]
    lookup_s: list[float]
    insert_s: list[float]
    delete_s: list[float]
    lookup_fit: LinearFit
    insert_fit: LinearFit
    delete_fit: LinearFit
    diagnostics: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return self.lookup_fit.through_origin

    @property
    def beta(self) -> float:
        return self.insert_fit.through_origin

    @property
    def gamma(self) -> float:
        return self.delete_fit.through_origin

    CSV_COLUMNS = ("size", "log2_size", "lookup_s", "insert_s", "delete_s")

    def rows(self) -> list[tuple]:
        return [(n, math.log2(n), lk, ins, de) for n, lk, ins, de in
                zip(self.sizes, self.lookup_s, self.insert_s, self.delete_s)]


@contextmanager
def _quiet_single_core():
    """Pin to one logical CPU (where supported) and pause the cyclic GC."""
    old_affinity = None
    if hasattr(os, "sched_getaffinity"):
        old_affinity = os.sched_getaffinity(0)
        try:
            os.sched_setaffinity(0, {min(old_affinity)})
        except OSError:
            old_affinity = None
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield old_affinity is not None
    finally:
        if gc_was_enabled:
            gc.enable()
        if old_affinity is not None:
            os.sched_setaffinity(0, old_affinity)


def _random_tree(rng: random.Random, n: int) -> tuple[AvlTree, list[int]]:
    keys = set()
    while len(keys) < n:
        keys.add(rng.getrandbits(64))
    keys = list(keys)
    rng.shuffle(keys)
    tree = AvlTree()
    for k in keys:
        tree.insert(k, None)
    return tree, keys


def _time_lookups(tree: AvlTree, probes: list[int]) -> float:
    lookup = tree.lookup
    t0 = time.perf_counter_ns()
    for k in probes:
        lookup(k)
    return (time.perf_counter_ns() - t0) / len(probes) * 1e-9


def _time_inserts(tree: AvlTree, fresh: list[int]) -> float:
    insert = tree.insert
    t0 = time.perf_counter_ns()
    for k in fresh:
        insert(k, None)
    return (time.perf_counter_ns() - t0) / len(fresh) * 1e-9


def default_sizes() -> list[int]:
    return sorted({int(round(x)) for x in np.logspace(2, 5, 10)})


def benchmark_constants(store_sizes: Optional[Sequence[int]] = None, trials: int = 1000,
                        rng_seed: int = 0, repeats: int = 7) -> BenchmarkResult:
    """Time look-up, insertion and whole-tree deletion on random AVL trees.

    Per size, ``trials`` operations are timed as a batch and divided
    (single operations sit near the timer resolution).  Rounds sweep all
    sizes in turn so that a noisy stretch of wall time hits every size
    alike; the fastest of ``repeats`` rounds is kept, after one discarded
    warm-up round, since scheduler and cache noise only ever add time.
    Look-up and insertion are fitted against ``log2 N``, deletion against
    ``N``.
    """
    sizes = sorted(store_sizes or default_sizes())
    if len(sizes) < 2 or sizes[-1] < 10 * sizes[0]:
        raise ValueError("sizes must span at least one decade")
    if trials < 1 or repeats < 1:
        raise ValueError("trials and repeats must be positive")
    rng = random.Random(rng_seed)
    best = {op: [math.inf] * len(sizes) for op in ("lookup", "insert", "delete")}
    with _quiet_single_core() as pinned:
        trees = [_random_tree(rng, n) for n in sizes]
        for round_no in range(repeats + 1):
            for i, n in enumerate(sizes):
                tree, keys = trees[i]
                probes = [keys[rng.randrange(n)] for _ in range(trials)]
                lookup = _time_lookups(tree, probes)

                # fresh trees, each grown by at most 10 %, keep N representative
                chunk = max(1, min(trials, n // 10))
                total, done = 0.0, 0
                while done < trials:
                    k = min(chunk, trials - done)
                    t, _ = _random_tree(rng, n)
                    total += _time_inserts(t, [rng.getrandbits(64) for _ in range(k)]) * k
                    done += k
                    if k == chunk and done < trials:
                        t.destroy()
                insert = total / trials

                # ``t`` is a freshly built random tree of about n records
                size = len(t)
                t0 = time.perf_counter_ns()
                t.destroy()
                delete = (time.perf_counter_ns() - t0) * 1e-9 * n / size

                if round_no == 0:
                    continue
                for op, value in (("lookup", lookup), ("insert", insert), ("delete", delete)):
                    best[op][i] = min(best[op][i], value)

    x_log = np.log2(np.array(sizes, dtype=float))
    x_lin = np.array(sizes, dtype=float)
    lookups, inserts, deletes = best["lookup"], best["insert"], best["delete"]
    return BenchmarkResult(
        sizes, lookups, inserts, deletes,
        _fit(x_log, np.array(lookups)), _fit(x_log, np.array(inserts)), _fit(x_lin, np.array(deletes)),
        {"trials": trials, "repeats": repeats, "rng_seed": rng_seed, "pinned": pinned,
         "method": "batch-and-divide",
         "timer_resolution_s": time.get_clock_info("perf_counter").resolution},
    )
