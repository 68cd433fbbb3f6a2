"""Local master-worker emulation of a coded matrix-vector product.

The master encodes ``A`` for an allocation, hands one block to each worker
and broadcasts ``x``. Every worker computes its block times ``x`` for real,
then holds the result until its modeled finish time, drawn from its run-time
law and stretched by the straggler slowdown. The master takes results in
order of finish time and stops as soon as it can decode.

Two execution modes share all of the above:

``virtual``
    One thread; finish times are bookkeeping only. Fast and exact.
``threads``
    One thread per worker, talking to the master through queues. Workers
    pause for ``time_scale`` wall seconds per modeled second. The master
    keeps a short reorder buffer (``guard`` seconds) so results are handled
    in finish-time order even when threads wake slightly out of order.

Given the same seed both modes produce the same metrics apart from the
wall-clock fields.

Message protocol, master to worker: ``Broadcast(x)`` then ``Done``; worker
to master: ``Result(worker, symbol_ids, values, finish)``.
"""

import csv
import heapq
import io
import math
import queue
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse

from .coding import DecodeError, PeelingDecoder, rlc_decode, rlc_encode, sample_degrees, sample_neighbors
from .models import sample_runtime
from .rng import children, make_rng
from .simulator import NO_STRAGGLERS

RLC = "rlc"
LT = "lt"
UNCODED = "uncoded"
VIRTUAL = "virtual"
THREADS = "threads"

MAGIC = b"HCMM"
_HEADER = struct.Struct("<4sIII")


# ---------------------------------------------------------------- matrix files

def write_matrix(path, A):
    """Write ``A`` as CSV (``.csv``) or the binary format (anything else).

    CSV: first line ``rows,cols``, then one line per row. Binary: 16-byte
    header (``HCMM``, u32 rows, u32 cols, u32 zero) and little-endian
    float64 data in row-major order.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("matrix must be 2-D")
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{A.shape[0]},{A.shape[1]}\n")
            np.savetxt(fh, A, delimiter=",", fmt="%.17g")
    else:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, A.shape[0], A.shape[1], 0))
            fh.write(A.astype("<f8").tobytes())


def read_matrix(path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, encoding="utf-8") as fh:
            head = fh.readline().strip().split(",")
            try:
                rows, cols = (int(v) for v in head)
            except ValueError:
                raise ValueError(f"{path}: first line must be 'rows,cols', got {','.join(head)!r}") from None
            A = np.loadtxt(fh, delimiter=",", ndmin=2) if rows else np.empty((0, cols))
        if A.shape != (rows, cols):
            raise ValueError(f"{path}: header says {rows}x{cols} but data is {A.shape[0]}x{A.shape[1]}")
        return A
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, rows, cols, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != rows * cols * 8:
        raise ValueError(f"{path}: expected {rows * cols * 8} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(float)


def generate_problem(rows, cols, seed):
    """Standard normal ``A`` (rows x cols) and ``x`` from one seed."""
    rng = make_rng(seed)
    return rng.standard_normal((rows, cols)), rng.standard_normal(cols)


# ---------------------------------------------------------------- small pieces

def inject_stragglers(count, straggler, rng):
    """I.i.d. Bernoulli(``p``) straggler mask."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return make_rng(rng).random(int(count)) < straggler.p


def verify(result, reference):
    """Infinity norm of ``result - reference``."""
    result = np.asarray(result, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if result.shape != reference.shape:
        raise ValueError(f"length mismatch: {result.shape} vs {reference.shape}")
    if result.size == 0:
        return 0.0
    return float(np.max(np.abs(result - reference)))


@dataclass(frozen=True)
class Broadcast:
    """``epoch``: wall-clock origin of modeled time (``perf_counter`` seconds)."""

    x: np.ndarray
    epoch: float


@dataclass(frozen=True)
class Result:
    worker: int
    symbol_ids: np.ndarray
    values: np.ndarray
    finish: float


class Done:
    pass


# ---------------------------------------------------------------- job description

@dataclass(frozen=True, eq=False)
class JobSpec:
    """One emulated job.

    ``A`` and ``x`` are given directly; see :func:`generate_problem` and
    :func:`read_matrix`. ``loads`` has one entry per cluster worker. For LT
    the code's ``k`` must equal the number of rows of ``A``. ``tamper`` is a
    test hook applied to the decoded vector before verification.
    """

    cluster: object
    loads: np.ndarray
    A: np.ndarray
    x: np.ndarray
    coding: str = RLC
    lt: object = None
    straggler: object = NO_STRAGGLERS
    seed: int = 0
    mode: str = VIRTUAL
    time_scale: float | None = None
    max_pause: float = 0.25
    guard: float = 0.05
    tolerance: float = 1e-6
    tamper: object = field(default=None, repr=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        x = np.asarray(self.x, dtype=float)
        loads = np.asarray(self.loads, dtype=np.int64)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "loads", loads)
        if A.ndim != 2 or x.ndim != 1:
            raise ValueError("A must be a matrix and x a vector")
        if A.shape[1] != x.shape[0]:
            raise ValueError(f"A has {A.shape[1]} columns but x has length {x.shape[0]}")
        if loads.shape != (self.cluster.n,):
            raise ValueError(f"{loads.shape[0]} loads for {self.cluster.n} workers")
        if np.any(loads < 0):
            raise ValueError("loads must be non-negative")
        if self.coding not in (RLC, LT, UNCODED):
            raise ValueError(f"unknown coding {self.coding!r}")
        if self.mode not in (VIRTUAL, THREADS):
            raise ValueError(f"unknown mode {self.mode!r}")
        if loads.sum() < A.shape[0]:
            raise ValueError(f"total load {loads.sum()} is below the {A.shape[0]} rows of A")
        if self.coding == LT and (self.lt is None or self.lt.k != A.shape[0]):
            raise ValueError("LT coding needs a code spec with k equal to the rows of A")
        if self.time_scale is not None and self.time_scale < 0:
            raise ValueError("time_scale must be non-negative")


JOB_COLUMNS = (
    "mode", "coding", "workers", "rows", "cols", "seed", "wait_s", "decode_s", "wall_wait_s", "wall_s",
    "rows_received", "symbols_used", "workers_reported", "max_abs_error", "rel_error",
    "success", "compute_s",
)
WALL_FIELDS = ("decode_s", "wall_wait_s", "wall_s", "mode")


@dataclass(frozen=True)
class JobMetrics:
    """``wait_s`` is the modeled time until decodable.

    Measured wall-clock fields: ``wall_wait_s`` from broadcast until the
    master can decode, ``decode_s`` spent decoding, ``wall_s`` for the
    whole job including encoding and verification.
    """

    mode: str
    coding: str
    workers: int
    rows: int
    cols: int
    seed: int
    wait_s: float
    decode_s: float
    wall_wait_s: float
    wall_s: float
    rows_received: int
    symbols_used: int
    workers_reported: int
    max_abs_error: float
    rel_error: float
    success: bool
    compute_s: tuple
    stragglers: tuple = ()

    def comparable(self):
        """Fields that must not depend on the execution mode."""
        def norm(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        return {k: norm(v) for k, v in self.__dict__.items() if k not in WALL_FIELDS}

    def csv_row(self):
        vals = []
        for col in JOB_COLUMNS:
            v = getattr(self, col)
            if col == "compute_s":
                v = ";".join(repr(float(t)) for t in v)
            elif isinstance(v, float):
                v = repr(v)
            elif isinstance(v, bool):
                v = int(v)
            vals.append(v)
        return vals

    def to_csv(self, header=None):
        buf = io.StringIO()
        if header:
            buf.write(header.rstrip() + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(JOB_COLUMNS)
        w.writerow(self.csv_row())
        return buf.getvalue()


# ---------------------------------------------------------------- encoding

@dataclass(frozen=True, eq=False)
class _Block:
    worker: int
    ids: np.ndarray
    data: np.ndarray
    coeffs: object = None
    neighbors: list = None


def _encode(spec, rng):
    A, loads = spec.A, spec.loads
    r = A.shape[0]
    blocks = []
    if spec.coding == RLC:
        for b in rlc_encode(A, loads, rng):
            blocks.append(_Block(b.worker, np.arange(b.rows), b.data, coeffs=b.coeffs))
        return blocks
    if spec.coding == UNCODED:
        start = 0
        for i, l in enumerate(loads):
            stop = min(start + int(l), r)
            ids = np.arange(start, stop)
            blocks.append(_Block(i, ids, A[start:stop]))
            start = stop
        return blocks
    total = int(loads.sum())
    nbrs = sample_neighbors(spec.lt.k, sample_degrees(spec.lt, total, rng), rng)
    indptr = np.zeros(total + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(nb) for nb in nbrs])
    indices = np.fromiter((i for nb in nbrs for i in nb), dtype=np.int64, count=indptr[-1])
    G = scipy.sparse.csr_matrix((np.ones(indptr[-1]), indices, indptr), shape=(total, spec.lt.k))
    coded = G @ A
    start = 0
    for i, l in enumerate(loads):
        l = int(l)
        blocks.append(_Block(i, np.arange(start, start + l), coded[start:start + l],
                             neighbors=nbrs[start:start + l]))
        start += l
    return blocks


# ---------------------------------------------------------------- collectors

class _RlcCollector:
    def __init__(self, r, blocks):
        self.r = r
        self.blocks = blocks
        self.rows = []
        self.values = []
        self.have = 0
        self.decode_s = 0.0
        self.symbols_used = 0

    def add(self, msg):
        coeffs = self.blocks[msg.worker].coeffs
        take = min(len(msg.values), self.r - self.have)
        self.rows.append(coeffs[:take])
        self.values.append(msg.values[:take])
        self.have += take
        return self.have >= self.r

    def finish(self):
        if self.have < self.r:
            return None
        t0 = time.perf_counter()
        try:
            y = rlc_decode(np.vstack(self.rows), np.concatenate(self.values))
        except DecodeError:
            y = None
        self.decode_s += time.perf_counter() - t0
        self.symbols_used = self.have
        return y


class _UncodedCollector:
    def __init__(self, r, blocks):
        self.y = np.full(r, np.nan)
        self.filled = 0
        self.r = r
        self.decode_s = 0.0
        self.symbols_used = 0

    def add(self, msg):
        self.y[msg.symbol_ids] = msg.values
        self.filled += len(msg.symbol_ids)
        self.symbols_used = self.filled
        return self.filled >= self.r

    def finish(self):
        return self.y if self.filled >= self.r else None


class _LtCollector:
    """Peels each arriving block right away, so decoding overlaps waiting."""

    def __init__(self, r, blocks):
        self.dec = PeelingDecoder(r)
        self.blocks = blocks
        self.decode_s = 0.0
        self.symbols_used = 0

    def add(self, msg):
        t0 = time.perf_counter()
        nbrs = self.blocks[msg.worker].neighbors
        for nb, v in zip(nbrs, msg.values.tolist()):
            self.dec.add(nb, v)
            if self.dec.done:
                break
        self.decode_s += time.perf_counter() - t0
        self.symbols_used = self.dec.received
        return self.dec.done

    def finish(self):
        res = self.dec.result()
        return res.values if res.success else None


_COLLECTORS = {RLC: _RlcCollector, UNCODED: _UncodedCollector, LT: _LtCollector}


# ---------------------------------------------------------------- execution

def _modeled_times(spec):
    """Per-worker modeled total time and straggler flags from the job seed."""
    coding_ss, straggler_ss, worker_ss = children(spec.seed, 3)
    n = spec.cluster.n
    flags = inject_stragglers(n, spec.straggler, straggler_ss)
    times = np.full(n, np.inf)
    for i, (model, ss) in enumerate(zip(spec.cluster.models, children(worker_ss, n))):
        if spec.loads[i] > 0:
            t = sample_runtime(model, int(spec.loads[i]), make_rng(ss))
            times[i] = t * spec.straggler.slowdown if flags[i] else t
    return make_rng(coding_ss), times, flags


def _run_virtual(blocks, x, times, collector):
    start = time.perf_counter()
    order = sorted((times[b.worker], b.worker) for b in blocks if len(b.ids))
    processed = []
    for t, w in order:
        b = blocks[w]
        processed.append((t, w))
        if collector.add(Result(w, b.ids, b.data @ x, t)):
            break
    return processed, time.perf_counter() - start


def _worker_loop(block, finish, inbox, outbox, stop, scale):
    msg = inbox.get()
    if isinstance(msg, Done):
        return
    values = block.data @ msg.x
    delay = msg.epoch + finish * scale - time.perf_counter()
    if delay > 0 and stop.wait(delay):
        return
    if not stop.is_set():
        outbox.put(Result(block.worker, block.ids, values, finish))


def _run_threads(blocks, x, times, collector, scale, guard):
    active = [b for b in blocks if len(b.ids)]
    outbox = queue.Queue()
    stop = threading.Event()
    inboxes = {b.worker: queue.Queue() for b in active}
    threads = [
        threading.Thread(target=_worker_loop, daemon=True,
                         args=(b, times[b.worker], inboxes[b.worker], outbox, stop, scale))
        for b in active
    ]
    for th in threads:
        th.start()
    start = time.perf_counter()
    for b in active:
        inboxes[b.worker].put(Broadcast(x, start))

    heap, processed, arrived = [], [], 0
    while heap or arrived < len(active):
        now = time.perf_counter()
        if heap:
            ready = start + heap[0][0] * scale + guard
            if arrived == len(active) or now >= ready:
                t, w, msg = heapq.heappop(heap)
                processed.append((t, w))
                if collector.add(msg):
                    break
                continue
            timeout = ready - now
        else:
            timeout = None
        try:
            msg = outbox.get(timeout=timeout)
        except queue.Empty:
            continue
        arrived += 1
        heapq.heappush(heap, (msg.finish, msg.worker, msg))
    waited = time.perf_counter() - start
    stop.set()
    for b in active:
        inboxes[b.worker].put(Done())
    for th in threads:
        th.join()
    return processed, waited


def run_job(spec):
    """Run one job; returns ``(JobMetrics, decoded vector or None)``."""
    wall0 = time.perf_counter()
    A, x = spec.A, spec.x
    r = A.shape[0]
    coding_rng, times, flags = _modeled_times(spec)
    blocks = _encode(spec, coding_rng)
    collector = _COLLECTORS[spec.coding](r, blocks)

    if spec.mode == VIRTUAL:
        processed, waited = _run_virtual(blocks, x, times, collector)
    else:
        finite = times[np.isfinite(times)]
        scale = spec.time_scale
        if scale is None:
            scale = spec.max_pause / finite.max() if finite.size and finite.max() > 0 else 0.0
        processed, waited = _run_threads(blocks, x, times, collector, scale, spec.guard)

    y = collector.finish()
    wall = time.perf_counter() - wall0
    if y is not None and spec.tamper is not None:
        y = spec.tamper(np.array(y))
    reference = A @ x
    if y is not None:
        err = verify(y, reference)
        scale_ref = float(np.max(np.abs(reference))) if r else 0.0
        rel = err / scale_ref if scale_ref > 0 else err
        success = bool(np.isfinite(rel) and rel < spec.tolerance)
    else:
        err, rel, success = math.nan, math.nan, False
    metrics = JobMetrics(
        mode=spec.mode,
        coding=spec.coding,
        workers=spec.cluster.n,
        rows=r,
        cols=A.shape[1],
        seed=spec.seed,
        wait_s=float(processed[-1][0]) if processed else 0.0,
        decode_s=collector.decode_s,
        wall_wait_s=waited,
        wall_s=wall,
        rows_received=int(sum(spec.loads[w] for _, w in processed)),
        symbols_used=int(collector.symbols_used),
        workers_reported=len(processed),
        max_abs_error=err,
        rel_error=rel,
        success=success,
        compute_s=tuple(float(t) for t in times),
        stragglers=tuple(bool(f) for f in flags),
    )
    return metrics, y
