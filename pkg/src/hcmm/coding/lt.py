"""Luby transform codes over the reals.

A coded row is the plain sum of ``d`` distinct source rows, where ``d`` is
drawn from a robust Soliton distribution. Inner products of coded rows with
``x`` are then sums of source inner products, and a peeling decoder recovers
the sources by repeatedly resolving symbols with a single unknown neighbour
and subtracting it everywhere else.
"""

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np

from ..rng import make_rng, substreams


@dataclass(frozen=True, eq=False)
class LtCodeSpec:
    """Degree distribution over ``1..k``; ``probs[d - 1]`` is P(degree = d).

    ``c`` and ``delta`` are recorded when the table came from
    :func:`robust_soliton`; ``epsilon`` is the reception overhead the master
    plans for, i.e. it waits for ``ceil(k * (1 + epsilon))`` symbols.
    """

    k: int
    probs: np.ndarray = field(repr=False)
    c: float | None = None
    delta: float | None = None
    epsilon: float = 0.0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if probs.shape != (self.k,):
            raise ValueError(f"degree table must have {self.k} entries, got {probs.shape}")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("degree table must be non-negative and sum to 1")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.c is not None and not self.c > 0:
            raise ValueError("c must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", cdf)

    @property
    def cdf(self):
        return self._cdf

    @property
    def mean_degree(self):
        return float(np.dot(np.arange(1, self.k + 1), self.probs))

    @property
    def planned_symbols(self):
        return math.ceil(self.k * (1.0 + self.epsilon) - 1e-9)


def ideal_soliton(k):
    """rho(1) = 1/k, rho(d) = 1/(d(d-1)) for d = 2..k."""
    rho = np.empty(k)
    rho[0] = 1.0 / k
    d = np.arange(2, k + 1, dtype=float)
    rho[1:] = 1.0 / (d * (d - 1.0))
    return rho


def robust_soliton(k, c, delta, epsilon=0.0, spike=True):
    """Robust Soliton table.

    ``S = c ln(k/delta) sqrt(k)`` and the spike sits at ``M = round(k/S)``
    (clamped to ``1..k``); ``tau(d) = S/(k d)`` below the spike and
    ``S ln(S/delta)/k`` at it. ``spike=False`` returns the ideal Soliton.
    """
    if k < 2:
        raise ValueError("robust Soliton needs k >= 2")
    if not c > 0:
        raise ValueError("c must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    weights = ideal_soliton(k)
    if spike:
        S = c * math.log(k / delta) * math.sqrt(k)
        M = min(max(int(round(k / S)), 1), k)
        tau = np.zeros(k)
        tau[: M - 1] = S / (k * np.arange(1, M))
        tau[M - 1] = max(S * math.log(S / delta) / k, 0.0)
        weights = weights + tau
    return LtCodeSpec(k, weights / weights.sum(), c=c, delta=delta, epsilon=epsilon)


def soliton_spike(k, c, delta):
    """Return ``(S, M)``: ripple size and spike degree of the robust Soliton."""
    S = c * math.log(k / delta) * math.sqrt(k)
    return S, min(max(int(round(k / S)), 1), k)


def sample_degrees(spec, count, rng):
    u = rng.random(count)
    return np.minimum(np.searchsorted(spec.cdf, u, side="right") + 1, spec.k)


def sample_neighbors(k, degrees, rng):
    """Uniform ``d``-subsets of ``range(k)`` via partial Fisher-Yates.

    A single permutation buffer is carried across symbols; each partial
    shuffle of it still yields a uniform subset.
    """
    degrees = [int(d) for d in degrees]
    u = rng.random(sum(degrees)).tolist()
    perm = list(range(k))
    out = []
    pos = 0
    for d in degrees:
        for j in range(d):
            t = j + int(u[pos] * (k - j))
            pos += 1
            perm[j], perm[t] = perm[t], perm[j]
        out.append(tuple(sorted(perm[:d])))
    return out


@dataclass(frozen=True, eq=False)
class LtSymbol:
    neighbors: tuple
    value: object = None
    id: int = -1

    def __post_init__(self):
        nb = tuple(int(i) for i in self.neighbors)
        if not nb:
            raise ValueError("an LT symbol needs at least one neighbour")
        if len(set(nb)) != len(nb):
            raise ValueError("duplicate neighbour indices")
        object.__setattr__(self, "neighbors", tuple(sorted(nb)))


def lt_encode(A, count, spec, rng, neighbors=None):
    """Encode ``count`` symbols; each value is the sum of its neighbour rows.

    ``neighbors`` overrides the random degree/neighbour draw.
    """
    A = np.asarray(A, dtype=float)
    if A.shape[0] != spec.k:
        raise ValueError(f"A has {A.shape[0]} rows but the code expects k={spec.k}")
    if count < 1:
        raise ValueError("count must be at least 1")
    if neighbors is None:
        neighbors = sample_neighbors(spec.k, sample_degrees(spec, count, rng), rng)
    elif len(neighbors) != count:
        raise ValueError("explicit neighbour list does not match count")
    symbols = []
    for sid, nb in enumerate(neighbors):
        nb = tuple(sorted(int(i) for i in nb))
        if nb and (nb[0] < 0 or nb[-1] >= spec.k):
            raise ValueError(f"neighbour index out of range in symbol {sid}")
        symbols.append(LtSymbol(nb, A[list(nb)].sum(axis=0), sid))
    return symbols


class PeelingDecoder:
    """Incremental peeling decoder.

    Symbols are fed one at a time with :meth:`add`; resolution happens
    eagerly so the decoder is complete as soon as the received set allows.
    Values may be ``None`` to track structure only.
    """

    def __init__(self, k):
        self.k = k
        self.known = bytearray(k)
        self.values = [None] * k
        self.recovered = 0
        self.received = 0
        self.substitutions = 0
        self.order = []
        self._pending = {}
        self._adj = defaultdict(list)
        self._ripple = deque()
        self._next = 0

    @property
    def done(self):
        return self.recovered == self.k

    def add(self, neighbors, value=None):
        """Feed one symbol; returns how many sources it newly resolved."""
        self.received += 1
        before = self.recovered
        track = value is not None
        if not track:
            v = None
        elif np.ndim(value) == 0:
            v = float(value)
        else:
            v = np.array(value, dtype=float)
        unknown = []
        for i in neighbors:
            if self.known[i]:
                if track:
                    v = v - self.values[i]
                    self.substitutions += 1
            else:
                unknown.append(i)
        if len(unknown) == 1:
            self._ripple.append((unknown[0], v))
        elif unknown:
            sid = self._next
            self._next += 1
            self._pending[sid] = [set(unknown), v]
            for i in unknown:
                self._adj[i].append(sid)
        self._drain(track)
        return self.recovered - before

    def _drain(self, track):
        while self._ripple:
            i, v = self._ripple.popleft()
            if self.known[i]:
                continue
            self.known[i] = 1
            self.values[i] = v
            self.recovered += 1
            self.order.append(i)
            for sid in self._adj.pop(i, ()):
                entry = self._pending.get(sid)
                if entry is None:
                    continue
                unknown, val = entry
                unknown.discard(i)
                if track:
                    val = entry[1] = val - v
                    self.substitutions += 1
                if len(unknown) == 1:
                    del self._pending[sid]
                    self._ripple.append((unknown.pop(), val))
                elif not unknown:
                    del self._pending[sid]

    def result(self):
        unresolved = tuple(i for i in range(self.k) if not self.known[i])
        values = None
        if self.recovered and self.values[self.order[0]] is not None:
            shape = np.shape(self.values[self.order[0]])
            values = np.full((self.k,) + shape, np.nan)
            for i in self.order:
                values[i] = self.values[i]
        return PeelResult(
            success=self.done,
            values=values,
            recovered=self.recovered,
            unresolved=unresolved,
            substitutions=self.substitutions,
            order=tuple(self.order),
        )


@dataclass(frozen=True, eq=False)
class PeelResult:
    """Outcome of a peeling run; unknown entries of ``values`` are NaN."""

    success: bool
    values: np.ndarray | None
    recovered: int
    unresolved: tuple
    substitutions: int
    order: tuple


def lt_decode_peel(symbols, k):
    """Peel ``symbols`` (with inner-product values) into ``k`` source values.

    A stall is a normal outcome: ``success`` is False and ``unresolved``
    lists the sources that could not be recovered.
    """
    if not symbols:
        raise ValueError("no symbols to decode")
    dec = PeelingDecoder(k)
    for s in symbols:
        dec.add(s.neighbors, s.value)
        if dec.done:
            break
    return dec.result()


def lt_success_rate(spec, count, trials, rng):
    """Fraction of trials in which ``count`` random symbols peel completely."""
    ok = 0
    for stream in substreams(rng, trials):
        nbrs = sample_neighbors(spec.k, sample_degrees(spec, count, stream), stream)
        dec = PeelingDecoder(spec.k)
        for nb in nbrs:
            dec.add(nb)
            if dec.done:
                break
        ok += dec.done
    return ok / trials


@dataclass(frozen=True, eq=False)
class OverheadEstimate:
    """``needed``: symbols that decode with probability >= ``confidence``."""

    needed: float
    mean: float
    confidence: float
    counts: np.ndarray = field(repr=False)

    @property
    def success_rate(self):
        return float(np.mean(np.isfinite(self.counts)))

    def rate_at(self, symbols):
        return float(np.mean(self.counts <= symbols))


def symbols_to_decode(spec, rng, max_symbols=None, chunk=None):
    """Stream random symbols until peeling completes; inf if ``max_symbols`` hit."""
    rng = make_rng(rng)
    max_symbols = max_symbols or 20 * spec.k + 100
    chunk = chunk or max(16, spec.k // 8)
    dec = PeelingDecoder(spec.k)
    while dec.received < max_symbols:
        n = min(chunk, max_symbols - dec.received)
        for nb in sample_neighbors(spec.k, sample_degrees(spec, n, rng), rng):
            dec.add(nb)
            if dec.done:
                return dec.received
    return math.inf


def lt_required_overhead(spec, trials, rng, confidence=None, max_symbols=None):
    """Monte Carlo estimate of the symbols needed for full peeling.

    ``needed`` is the empirical ``confidence`` quantile of the per-trial
    symbol counts (default ``1 - spec.delta``); ``mean`` is their average.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if confidence is None:
        if spec.delta is None:
            raise ValueError("confidence is required when the spec has no delta")
        confidence = 1.0 - spec.delta
    counts = np.array(
        [symbols_to_decode(spec, s, max_symbols) for s in substreams(rng, trials)],
        dtype=float,
    )
    needed = float(np.quantile(counts, confidence, method="inverted_cdf"))
    return OverheadEstimate(needed=needed, mean=float(counts.mean()), confidence=confidence, counts=counts)
