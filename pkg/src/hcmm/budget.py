"""Budget-constrained machine selection.

Machines come in classes ``k`` with shift ``a_k``, straggling parameter
``mu_k`` and ``N_k`` units available, and cost ``kappa * mu_k ** gamma`` per
second. When every class shares the same product ``xi = a_k mu_k``, running
HCMM on ``n_k`` machines of each class costs, in expectation and for large
clusters::

    kappa * r * x_xi * sum(n_k mu_k^gamma) / sum(n_k mu_k)

where ``x_xi > 1`` solves ``exp(x - xi - 1) = x``. The greedy search drops
machines from the fastest class still in use until that cost fits.
"""

import math
from dataclasses import dataclass, field

from . import _roots
from .models import ClusterSpec, RuntimeModel

XI_TOL = 1e-9


@dataclass(frozen=True)
class MachineClass:
    a: float
    mu: float
    count: int
    name: str = ""

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"machine class shift must be positive, got {self.a!r}")
        if not self.mu > 0:
            raise ValueError(f"machine class mu must be positive, got {self.mu!r}")
        if int(self.count) != self.count or self.count < 0:
            raise ValueError(f"machine count must be a non-negative integer, got {self.count!r}")


@dataclass(frozen=True)
class CostModel:
    kappa: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.gamma >= 1:
            raise ValueError("gamma must be at least 1")


@dataclass(frozen=True)
class BudgetScenario:
    """Classes are kept sorted by ``mu`` ascending (stable for ties)."""

    classes: tuple
    cost: CostModel
    r: int
    budget: float

    def __post_init__(self):
        classes = tuple(sorted(self.classes, key=lambda c: c.mu))
        object.__setattr__(self, "classes", classes)
        if not classes:
            raise ValueError("at least one machine class is required")
        if int(self.r) != self.r or self.r < 1:
            raise ValueError("r must be a positive integer")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        xis = [c.a * c.mu for c in classes]
        if max(xis) - min(xis) > XI_TOL:
            raise ValueError(
                f"all classes must share a*mu; got {', '.join(f'{x:.12g}' for x in xis)}"
            )

    @property
    def xi(self):
        return self.classes[0].a * self.classes[0].mu

    @property
    def available(self):
        return tuple(c.count for c in self.classes)

    def cluster(self, counts):
        """Concrete exponential cluster with ``counts[k]`` machines of class ``k``."""
        groups = [(n, RuntimeModel.exponential(c.a, c.mu)) for n, c in zip(counts, self.classes)]
        return ClusterSpec.from_groups(groups)


@dataclass(frozen=True)
class SearchResult:
    counts: tuple | None
    cost: float | None
    time: float | None
    iterations: int
    feasible: bool
    path: tuple = field(default=(), repr=False)


def solve_x_xi(xi):
    """Root ``x > 1`` of ``exp(x - xi - 1) = x``."""
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi!r}")

    def g(x):
        return x - xi - 1.0 - math.log(x)

    hi = _roots.expand_bracket(g, 1.0, xi + 1.0)
    return _roots.bisect(g, 1.0, hi)


def machine_cost_rate(mu, cost):
    return cost.kappa * mu**cost.gamma


def _check_counts(counts, scenario):
    counts = tuple(int(n) for n in counts)
    if len(counts) != len(scenario.classes):
        raise ValueError(f"expected {len(scenario.classes)} counts, got {len(counts)}")
    if any(n < 0 for n in counts):
        raise ValueError("counts must be non-negative")
    if sum(counts) < 1:
        raise ValueError("at least one machine must be used")
    return counts


def hcmm_expected_cost(counts, scenario):
    counts = _check_counts(counts, scenario)
    x = solve_x_xi(scenario.xi)
    num = math.fsum(n * machine_cost_rate(c.mu, scenario.cost) for n, c in zip(counts, scenario.classes))
    den = math.fsum(n * c.mu for n, c in zip(counts, scenario.classes))
    return scenario.r * x * num / den


def expected_time(counts, scenario):
    """HCMM nominal completion time ``r x_xi / sum(n_k mu_k)``."""
    counts = _check_counts(counts, scenario)
    x = solve_x_xi(scenario.xi)
    return scenario.r * x / math.fsum(n * c.mu for n, c in zip(counts, scenario.classes))


def cost_bounds(scenario):
    """``(C_min, C_max)``: slowest-only and fastest-only cost among available classes."""
    present = [c for c in scenario.classes if c.count > 0] or list(scenario.classes)
    x = solve_x_xi(scenario.xi)
    k = scenario.cost
    return (
        k.kappa * scenario.r * x * present[0].mu ** (k.gamma - 1.0),
        k.kappa * scenario.r * x * present[-1].mu ** (k.gamma - 1.0),
    )


def heuristic_search(scenario, budget=None):
    """Greedy descent from all machines; drop one from the fastest class in use.

    ``iterations`` counts cost evaluations, the initial all-machines one
    included. ``path`` lists every ``(counts, cost)`` visited.
    """
    budget = scenario.budget if budget is None else budget
    counts = list(scenario.available)
    path = []
    while sum(counts) > 0:
        cost = hcmm_expected_cost(counts, scenario)
        path.append((tuple(counts), cost))
        if cost <= budget:
            return SearchResult(tuple(counts), cost, expected_time(counts, scenario),
                                len(path), True, tuple(path))
        j = max(k for k, n in enumerate(counts) if n > 0)
        counts[j] -= 1
    return SearchResult(None, None, None, len(path), False, tuple(path))
