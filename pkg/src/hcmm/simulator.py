"""Monte Carlo completion times for load allocations.

The master finishes at the first instant the rows returned by finished
workers add up to the number it needs. For an uncoded scheme that is the
slowest loaded worker; for a coded scheme it is an order statistic weighted
by load.

Trials are generated in fixed-size blocks, each with its own substream of
the caller's seed, so a run split across threads reproduces the serial run
bit for bit. Passing the same seed to different allocations on the same
cluster reuses the same uniforms (common random numbers).
"""

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .allocator import Scheme, allocate
from .models import cdf_runtime
from .rng import children, make_rng

BLOCK_TRIALS = 1024


@dataclass(frozen=True)
class StragglerModel:
    """Each worker independently straggles with probability ``p``.

    A straggler's total time is ``slowdown`` times its compute time; the
    default 4 means it waits three compute-times before reporting.
    """

    p: float = 0.0
    slowdown: float = 4.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"straggler probability must lie in [0, 1], got {self.p!r}")
        if not self.slowdown >= 1.0:
            raise ValueError(f"slowdown must be >= 1, got {self.slowdown!r}")


NO_STRAGGLERS = StragglerModel()


@dataclass(frozen=True, eq=False)
class TrialOutcome:
    completion: float
    finish_times: np.ndarray
    rows_collected: int


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    trials: int


def completion_time(loads, finish_times, r_needed):
    """First time the cumulative load of finished workers reaches ``r_needed``."""
    loads = np.asarray(loads)
    finish_times = np.asarray(finish_times, dtype=float)
    if loads.shape != finish_times.shape:
        raise ValueError("loads and finish_times must have the same length")
    active = loads > 0
    if r_needed > loads[active].sum():
        raise ValueError(f"r_needed={r_needed} exceeds the total load {loads.sum()}; undecodable")
    if r_needed <= 0:
        return 0.0
    t = finish_times[active]
    order = np.argsort(t, kind="stable")
    cum = np.cumsum(loads[active][order])
    return float(t[order][np.searchsorted(cum, r_needed)])


def _batch_completion(loads, times, r_needed):
    order = np.argsort(times, axis=1, kind="stable")
    t_sorted = np.take_along_axis(times, order, axis=1)
    cum = np.cumsum(loads[order], axis=1)
    idx = np.argmax(cum >= r_needed, axis=1)
    rows = cum[np.arange(len(cum)), idx]
    return t_sorted[np.arange(len(cum)), idx], rows


def _draw(rng, trials, n, straggler):
    u = rng.random((trials, n))
    flags = rng.random((trials, n)) < straggler.p
    return u, flags


def _finish_times(params, loads, u, flags, straggler):
    a, mu, alpha = params
    active = loads > 0
    base = -np.log1p(-u)
    t = loads * (a + base ** (1.0 / alpha) / mu)
    if straggler.slowdown != 1.0:
        t = np.where(flags, t * straggler.slowdown, t)
    return np.where(active, t, np.inf)


def _check_alloc(cluster, loads, r_needed):
    loads = np.asarray(loads, dtype=np.int64)
    if loads.shape != (cluster.n,):
        raise ValueError(f"allocation has {loads.shape[0]} loads for {cluster.n} workers")
    if np.any(loads < 0):
        raise ValueError("loads must be non-negative")
    if r_needed > loads.sum():
        raise ValueError(f"r_needed={r_needed} exceeds the total load {loads.sum()}; undecodable")
    return loads


def _loads_of(allocation):
    return allocation.loads if hasattr(allocation, "loads") else np.asarray(allocation)


def simulate_once(cluster, allocation, r_needed, straggler=NO_STRAGGLERS, rng=None):
    rng = make_rng(rng)
    loads = _check_alloc(cluster, _loads_of(allocation), r_needed)
    u, flags = _draw(rng, 1, cluster.n, straggler)
    t = _finish_times(cluster.params(), loads, u, flags, straggler)[0]
    done, rows = _batch_completion(loads, t[None, :], r_needed)
    finish = np.where(loads > 0, t, np.nan)
    return TrialOutcome(float(done[0]), finish, int(rows[0]))


def _block_sizes(trials):
    full, rest = divmod(trials, BLOCK_TRIALS)
    return [BLOCK_TRIALS] * full + ([rest] if rest else [])


def simulate_completion_times(cluster, allocation, r_needed, straggler=NO_STRAGGLERS,
                              trials=1000, rng=None, workers=1):
    """Array of ``trials`` completion times.

    Block ``b`` always uses substream ``b`` of the seed, whatever
    ``workers`` is, so the result does not depend on parallelism.
    """
    loads = _check_alloc(cluster, _loads_of(allocation), r_needed)
    sizes = _block_sizes(int(trials))
    seeds = children(rng, len(sizes))
    params = cluster.params()

    def run(block):
        g = make_rng(seeds[block])
        u, flags = _draw(g, sizes[block], cluster.n, straggler)
        t = _finish_times(params, loads, u, flags, straggler)
        return _batch_completion(loads, t, r_needed)[0]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    return np.concatenate(parts) if parts else np.empty(0)


def estimate_expected_time(cluster, allocation, r_needed, straggler=NO_STRAGGLERS,
                           trials=1000, rng=None, workers=1):
    """Sample mean and standard error of the completion time."""
    if trials < 2:
        raise ValueError("at least two trials are needed for a standard error")
    samples = simulate_completion_times(cluster, allocation, r_needed, straggler, trials, rng, workers)
    return Estimate(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(trials)), int(trials))


def expected_aggregate_return(cluster, loads, t):
    """Expected number of rows returned by time ``t``; loads may be fractional."""
    total = 0.0
    for model, load in zip(cluster.models, np.asarray(loads, dtype=float)):
        if load > 0:
            total += load * cdf_runtime(model, load, t)
    return total


def shortfall_probability(cluster, loads, t, r, trials=1000, rng=None):
    """Monte Carlo estimate of P[rows returned by ``t`` < r]."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = make_rng(rng)
    loads = np.asarray(loads, dtype=float)
    a, mu, alpha = cluster.params()
    active = loads > 0
    u = rng.random((int(trials), cluster.n))
    safe = np.where(active, loads, 1.0)
    times = safe * (a + (-np.log1p(-u)) ** (1.0 / alpha) / mu)
    returned = np.where(active & (times <= t), loads, 0.0).sum(axis=1)
    return float(np.mean(returned < r))


@dataclass(frozen=True)
class SchemeResult:
    scheme: Scheme
    mean: float
    stderr: float
    redundancy: float
    trials: int
    total_load: int
    r_needed: int
    decode_s: float | None = None


CSV_COLUMNS = ("scheme", "mean_s", "stderr_s", "redundancy", "trials", "decode_s")


@dataclass(frozen=True)
class SchemeComparison:
    rows: tuple
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, scheme):
        scheme = Scheme(scheme)
        for row in self.rows:
            if row.scheme is scheme:
                return row
        raise KeyError(scheme)

    def speedup(self, baseline, scheme=Scheme.HCMM):
        """Relative time saved by ``scheme`` over ``baseline``."""
        return 1.0 - self[scheme].mean / self[baseline].mean

    def to_csv(self):
        buf = io.StringIO()
        meta = " ".join(f"{k}={v}" for k, v in self.metadata.items())
        buf.write(f"# hcmm {__version__} {meta}".rstrip() + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            decode = "" if row.decode_s is None else repr(row.decode_s)
            w.writerow([row.scheme.value, repr(row.mean), repr(row.stderr),
                        repr(row.redundancy), row.trials, decode])
        return buf.getvalue()


def coded_target(r, lt_epsilon=None):
    """Results a coded scheme waits for: ``r`` for RLC, ``ceil(r(1+eps))`` for LT."""
    if lt_epsilon is None:
        return int(r)
    return math.ceil(r * (1.0 + lt_epsilon) - 1e-9)


def compare_schemes(cluster, r, lt_epsilon=None, straggler=NO_STRAGGLERS, trials=5000, rng=None,
                    schemes=tuple(Scheme), uc_trials=2000, decode_times=None, workers=1):
    """Simulate every scheme on the same random numbers.

    Coded schemes are sized for ``coded_target(r, lt_epsilon)`` results;
    uncoded ones wait for all of their rows. ``decode_times`` optionally
    maps scheme to a measured decode time for the CSV column.
    """
    if trials < 2:
        raise ValueError("at least two trials are needed for a standard error")
    sim_seed, uc_seed = children(rng, 2)
    target = coded_target(r, lt_epsilon)
    rows = []
    for scheme in schemes:
        scheme = Scheme(scheme)
        alloc = allocate(scheme, cluster, target if scheme.coded else r,
                         sim_budget=uc_trials, rng=make_rng(uc_seed), straggler=straggler)
        need = alloc.rows_needed
        est = estimate_expected_time(cluster, alloc, need, straggler, trials, sim_seed, workers)
        decode = None if decode_times is None else decode_times.get(scheme)
        rows.append(SchemeResult(scheme, est.mean, est.stderr, alloc.total / r, est.trials,
                                 alloc.total, need, decode))
    return SchemeComparison(tuple(rows))
