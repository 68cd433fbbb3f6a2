"""Worker run-time laws and cluster descriptions.

A worker loaded with ``load`` rows finishes at time ``T`` where::

    P[T <= t] = 1 - exp(-((mu / load) * (t - a * load)) ** alpha),   t >= a * load

``alpha = 1`` is the shifted exponential law; any other shape gives the
shifted Weibull law. Times are in seconds, ``a`` in seconds per row and
``mu`` in rows per second.
"""

import math
from dataclasses import dataclass, field

import numpy as np

EXPONENTIAL = "exponential"
WEIBULL = "weibull"


@dataclass(frozen=True)
class RuntimeModel:
    """Shifted exponential (``alpha is None``) or shifted Weibull run-time law."""

    a: float
    mu: float
    alpha: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise ValueError(f"shift a must be positive, got {self.a!r}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"straggling parameter mu must be positive, got {self.mu!r}")
        if self.alpha is not None and not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"shape alpha must be positive, got {self.alpha!r}")

    @classmethod
    def exponential(cls, a, mu):
        return cls(float(a), float(mu))

    @classmethod
    def weibull(cls, a, mu, alpha):
        return cls(float(a), float(mu), float(alpha))

    @property
    def kind(self):
        return EXPONENTIAL if self.alpha is None else WEIBULL

    @property
    def shape(self):
        """Shape used in formulas; the exponential law has shape 1."""
        return 1.0 if self.alpha is None else self.alpha


@dataclass(frozen=True)
class WorkerSpec:
    id: int
    model: RuntimeModel


@dataclass(frozen=True)
class ClusterSpec:
    """Ordered collection of workers; ``params()`` exposes them as arrays."""

    workers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        workers = tuple(self.workers)
        object.__setattr__(self, "workers", workers)
        if not workers:
            raise ValueError("a cluster needs at least one worker")
        ids = [w.id for w in workers]
        if len(set(ids)) != len(ids):
            raise ValueError("worker ids must be unique within a cluster")

    @classmethod
    def from_models(cls, models):
        return cls(tuple(WorkerSpec(i, m) for i, m in enumerate(models)))

    @classmethod
    def from_groups(cls, groups):
        """Build from ``[(count, model), ...]``; ids run 0..n-1 in group order."""
        models = []
        for count, model in groups:
            models.extend([model] * int(count))
        return cls.from_models(models)

    def __len__(self):
        return len(self.workers)

    @property
    def n(self):
        return len(self.workers)

    @property
    def models(self):
        return [w.model for w in self.workers]

    def params(self):
        """Return ``(a, mu, alpha)`` float arrays, alpha = 1 for exponential workers."""
        a = np.array([w.model.a for w in self.workers], dtype=float)
        mu = np.array([w.model.mu for w in self.workers], dtype=float)
        alpha = np.array([w.model.shape for w in self.workers], dtype=float)
        return a, mu, alpha


def _check_load(load):
    if np.any(np.asarray(load) <= 0):
        raise ValueError("load must be positive; zero-load workers have no run-time")


def cdf_runtime(model, load, t):
    """Probability that a worker with ``load`` rows has finished by ``t``."""
    _check_load(load)
    t = np.asarray(t, dtype=float)
    z = np.maximum(t - model.a * load, 0.0) * (model.mu / load)
    out = -np.expm1(-(z ** model.shape))
    return float(out) if out.ndim == 0 else out


def runtime_quantile(model, load, u):
    """Inverse CDF: the run-time at uniform level ``u`` in [0, 1)."""
    _check_load(load)
    u = np.asarray(u, dtype=float)
    tail = (-np.log1p(-u)) ** (1.0 / model.shape)
    out = load * (model.a + tail / model.mu)
    return float(out) if out.ndim == 0 else out


def sample_runtime(model, load, rng, size=None):
    """Draw run-times by inverse transform, one uniform per sample."""
    return runtime_quantile(model, load, rng.random(size))


def mean_runtime(model, load):
    """Expected run-time ``a*load + (load/mu) * Gamma(1 + 1/alpha)``."""
    _check_load(load)
    return model.a * load + (load / model.mu) * math.gamma(1.0 + 1.0 / model.shape)


def unit_time(model):
    """Expected seconds to compute one row."""
    return mean_runtime(model, 1)
