"""Load allocation: HCMM and the three benchmark schemes.

HCMM gives worker ``i`` a load ``tau / lam_i`` where ``lam_i`` maximises that
worker's expected return per unit time and ``tau = r / s`` with ``s`` the
cluster's aggregate rate. Benchmarks follow the usual comparisons: equal
uncoded split, split proportional to speed, and equal coded loads with a
Monte Carlo tuned redundancy.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _roots
from .models import unit_time
from .rng import make_rng

# Guards ceil() against float noise such as 75.00000000000001.
_CEIL_RTOL = 1e-9

UNIFORM_CODED_GRID = tuple(np.round(np.arange(1.0, 4.0 + 1e-9, 0.05), 10))


class Scheme(str, enum.Enum):
    HCMM = "hcmm"
    UNIFORM_UNCODED = "uniform-uncoded"
    LOAD_BALANCED_UNCODED = "load-balanced-uncoded"
    UNIFORM_CODED = "uniform-coded"

    @property
    def coded(self):
        return self in (Scheme.HCMM, Scheme.UNIFORM_CODED)


@dataclass(frozen=True)
class WorkerRate:
    """``lam``: seconds per row at the optimum; ``rate``: contribution to ``s``.

    ``excess`` is ``lam - a`` computed directly, without cancellation.
    """

    lam: float
    rate: float
    excess: float = float("nan")


@dataclass(frozen=True, eq=False)
class Allocation:
    """Integer row counts per worker.

    ``r_target`` is the number of results the master needs for a coded
    scheme. Uncoded schemes need every assigned row, see ``rows_needed``.
    ``ideal`` holds the loads before ceil rounding when the scheme defines
    them.
    """

    loads: np.ndarray
    scheme: Scheme
    r_target: int
    tau_star: float = 0.0
    ideal: np.ndarray | None = None

    @property
    def total(self):
        return int(self.loads.sum())

    @property
    def rows_needed(self):
        return self.r_target if self.scheme.coded else self.total


def ceil_loads(x):
    x = np.asarray(x, dtype=float)
    return np.ceil(x - _CEIL_RTOL * np.maximum(1.0, np.abs(x))).astype(np.int64)


def _excess_equation(model):
    # log form of exp((mu d)^alpha) = 1 + alpha mu^alpha (a + d) d^(alpha-1), with d = lam - a;
    # working in d keeps full precision when lam sits just above a
    a, mu, alpha = model.a, model.mu, model.shape

    def g(d):
        return (mu * d) ** alpha - math.log1p(alpha * mu**alpha * (a + d) * d ** (alpha - 1.0))

    return g


def lambda_residual(model, lam, excess=None):
    """Relative residual ``|e^u - rhs| / e^u`` of the defining equation at ``lam``.

    Pass ``excess`` (``lam - a`` as held by the solver) when ``lam`` is much
    larger than the gap, since re-forming ``lam - a`` in floating point can
    lose more precision than the root itself carries.
    """
    d = lam - model.a if excess is None else excess
    return abs(math.expm1(-_excess_equation(model)(d)))


def _smallest_root(g, lo, hi, points=256):
    xs = lo + (hi - lo) * np.geomspace(1e-9, 1.0, points)
    prev = lo
    for x in xs:
        if g(x) >= 0:
            return _roots.bisect(g, prev, float(x))
        prev = float(x)
    return _roots.bisect(g, prev, hi)


def solve_lambda(model):
    """Solve for ``lam > a`` and the worker's rate contribution."""
    a, mu, alpha = model.a, model.mu, model.shape
    g = _excess_equation(model)
    lo = 1e-12 / mu
    hi = _roots.expand_bracket(g, lo, 1.0 / mu)
    d = _smallest_root(g, lo, hi)
    res = abs(math.expm1(-g(d)))
    if not res < 1e-9:
        raise _roots.RootFindingError(f"lambda residual {res:.3e} too large for {model}")
    lam = a + d
    q = alpha * mu**alpha * d ** (alpha - 1.0)
    return WorkerRate(lam=lam, rate=q / (1.0 + q * lam), excess=d)


def worker_rates(cluster):
    return [solve_lambda(m) for m in cluster.models]


def cluster_rate(cluster):
    """Aggregate rate ``s`` in rows per second."""
    return math.fsum(w.rate for w in worker_rates(cluster))


def _check_r(r_target):
    if int(r_target) != r_target or r_target < 1:
        raise ValueError(f"r_target must be a positive integer, got {r_target!r}")
    return int(r_target)


def hcmm_allocate(cluster, r_target):
    r_target = _check_r(r_target)
    rates = worker_rates(cluster)
    s = math.fsum(w.rate for w in rates)
    tau = r_target / s
    ideal = np.array([tau / w.lam for w in rates])
    return Allocation(ceil_loads(ideal), Scheme.HCMM, r_target, tau_star=tau, ideal=ideal)


def uniform_uncoded(cluster, r_target):
    r_target = _check_r(r_target)
    ideal = np.full(cluster.n, r_target / cluster.n)
    return Allocation(ceil_loads(ideal), Scheme.UNIFORM_UNCODED, r_target, ideal=ideal)


def load_balanced_uncoded(cluster, r_target):
    r_target = _check_r(r_target)
    w = np.array([1.0 / unit_time(m) for m in cluster.models])
    ideal = r_target * w / w.sum()
    return Allocation(ceil_loads(ideal), Scheme.LOAD_BALANCED_UNCODED, r_target, ideal=ideal)


def _kth_finish(loads_per_worker, base, a, mu, alpha, r_target, stretch):
    """Mean time until ``r_target`` rows arrive when every worker has the same load."""
    need = math.ceil(r_target / loads_per_worker)
    times = loads_per_worker * (a + base ** (1.0 / alpha) / mu) * stretch
    kth = np.partition(times, need - 1, axis=1)[:, need - 1]
    return kth.mean()


def uniform_coded(cluster, r_target, sim_budget=2000, rng=None, grid=UNIFORM_CODED_GRID, straggler=None):
    """Equal coded loads ``ceil(R r / n)`` with ``R`` chosen on ``grid``.

    Every grid point is scored on the same simulated variates (common
    random numbers), so the choice is a deterministic function of ``rng``.
    Ties go to the smaller redundancy. ``straggler`` (an object with ``p``
    and ``slowdown``) is included in the scoring when given.
    """
    r_target = _check_r(r_target)
    if sim_budget < 1:
        raise ValueError("sim_budget must be at least 1")
    rng = make_rng(rng)
    a, mu, alpha = cluster.params()
    base = -np.log1p(-rng.random((int(sim_budget), cluster.n)))
    stretch = 1.0
    if straggler is not None and straggler.p > 0:
        flags = rng.random(base.shape) < straggler.p
        stretch = np.where(flags, straggler.slowdown, 1.0)
    best = None
    for factor in grid:
        per = int(ceil_loads(factor * r_target / cluster.n))
        if per * cluster.n < r_target:
            continue
        m = _kth_finish(per, base, a, mu, alpha, r_target, stretch)
        if best is None or m < best[0]:
            best = (m, per)
    if best is None:
        raise ValueError("no feasible redundancy on the grid")
    loads = np.full(cluster.n, best[1], dtype=np.int64)
    return Allocation(loads, Scheme.UNIFORM_CODED, r_target)


def allocate(scheme, cluster, r_target, sim_budget=2000, rng=None, straggler=None):
    scheme = Scheme(scheme)
    if scheme is Scheme.HCMM:
        return hcmm_allocate(cluster, r_target)
    if scheme is Scheme.UNIFORM_UNCODED:
        return uniform_uncoded(cluster, r_target)
    if scheme is Scheme.LOAD_BALANCED_UNCODED:
        return load_balanced_uncoded(cluster, r_target)
    return uniform_coded(cluster, r_target, sim_budget=sim_budget, rng=rng, straggler=straggler)


def redundancy(allocation):
    """Coded over-provisioning ``sum(loads) / r_target``."""
    return allocation.loads.sum() / allocation.r_target
