"""Command-line front end: ``hcmm <command> [options]``.

Exit status is 0 on success, 1 when a job fails verification or a budget
is infeasible, and 2 for usage or configuration errors.
"""

import argparse
import csv
import dataclasses
import io
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .allocator import Scheme, allocate
from .budget import cost_bounds, expected_time, hcmm_expected_cost, heuristic_search
from .coding import lt_required_overhead, robust_soliton
from .emulator import LT, RLC, THREADS, UNCODED, VIRTUAL, JobSpec, generate_problem, read_matrix, run_job
from .scenarios import BUILTINS, Coding, ConfigError, load
from .simulator import SchemeComparison, StragglerModel, coded_target, compare_schemes, estimate_expected_time

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_LT = Coding("lt", 0.03, 0.1, 0.13)


class UsageError(Exception):
    pass


def _header(**meta):
    fields = " ".join(f"{k}={v}" for k, v in meta.items() if v is not None)
    return f"# hcmm {__version__} {fields}".rstrip()


def _emit(text, out):
    if out:
        path = Path(out)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _table(header, rows, meta):
    buf = io.StringIO()
    buf.write(meta + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _scenario(args):
    sc = load(args.scenario)
    updates = {}
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    if getattr(args, "coding", None) == "lt" and not sc.lt:
        updates["coding"] = DEFAULT_LT
    elif getattr(args, "coding", None) == "rlc":
        updates["coding"] = Coding()
    p = getattr(args, "straggler_p", None)
    slow = getattr(args, "slowdown", None)
    if p is not None or slow is not None:
        updates["straggler"] = StragglerModel(
            sc.straggler.p if p is None else p, sc.straggler.slowdown if slow is None else slow
        )
    return dataclasses.replace(sc, **updates) if updates else sc


def _meta(args, sc, command, **extra):
    meta = dict(command=command, scenario=sc.name, seed=args.seed)
    if sc.random is not None:
        meta["cluster_seed"] = sc.random.seed
    meta.update(extra)
    return meta


def _parse_counts(text):
    try:
        counts = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--counts must be comma-separated integers, got {text!r}") from None
    if any(c < 0 for c in counts) or sum(counts) < 1:
        raise UsageError("--counts must be non-negative with at least one machine")
    return counts


# ---------------------------------------------------------------- commands

def cmd_allocate(args):
    sc = _scenario(args)
    if args.counts:
        if sc.budget is None:
            raise UsageError("--counts needs a scenario with a budget section")
        cluster = sc.budget_scenario().cluster(_parse_counts(args.counts))
    else:
        cluster = sc.cluster()
    r = args.r or sc.r
    scheme = Scheme(args.scheme)
    target = coded_target(r, sc.lt_epsilon) if scheme.coded else r
    alloc = allocate(scheme, cluster, target, rng=args.seed)
    red = alloc.total / r
    rows = []
    for w, load in zip(cluster.workers, alloc.loads):
        m = w.model
        rows.append([w.id, _fmt(m.a), _fmt(m.mu), "" if m.alpha is None else _fmt(m.alpha), int(load)])
    meta = _header(**_meta(args, sc, "allocate", scheme=scheme.value, r=r,
                           tau_star=repr(alloc.tau_star), redundancy=repr(red)))
    _emit(_table(("worker", "a", "mu", "alpha", "load"), rows, meta), args.out)
    print(f"scheme={scheme.value} r={r} total_load={alloc.total} tau*={alloc.tau_star:.4f} "
          f"redundancy={red:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args):
    sc = _scenario(args)
    scheme = Scheme(args.scheme)
    cluster = sc.cluster()
    target = coded_target(sc.r, sc.lt_epsilon) if scheme.coded else sc.r
    alloc = allocate(scheme, cluster, target, rng=args.seed, straggler=sc.straggler)
    est = estimate_expected_time(cluster, alloc, alloc.rows_needed, sc.straggler, sc.trials, args.seed)
    meta = _header(**_meta(args, sc, "simulate", trials=sc.trials))
    rows = [[scheme.value, repr(est.mean), repr(est.stderr), repr(alloc.total / sc.r), est.trials]]
    _emit(_table(("scheme", "mean_s", "stderr_s", "redundancy", "trials"), rows, meta), args.out)
    return EXIT_OK


def _compare(sc, seed, command="compare"):
    cmp = compare_schemes(sc.cluster(), sc.r, lt_epsilon=sc.lt_epsilon, straggler=sc.straggler,
                          trials=sc.trials, rng=seed, schemes=sc.schemes)
    meta = dict(command=command, scenario=sc.name, seed=seed, trials=sc.trials)
    if sc.random is not None:
        meta["cluster_seed"] = sc.random.seed
    return SchemeComparison(cmp.rows, meta)


def cmd_compare(args):
    sc = _scenario(args)
    if sc.trials < 2:
        raise UsageError("--trials must be at least 2 for a standard error")
    _emit(_compare(sc, args.seed).to_csv(), args.out)
    return EXIT_OK


def _budget_report(sc, limit=None):
    bs = sc.budget_scenario(limit)
    res = heuristic_search(bs)
    cmin, cmax = cost_bounds(bs)
    counts = "" if res.counts is None else ";".join(map(str, res.counts))
    row = [counts, "" if res.cost is None else repr(res.cost), "" if res.time is None else repr(res.time),
           res.iterations, int(res.feasible), repr(bs.budget), repr(cmin), repr(cmax)]
    return res, row


BUDGET_COLUMNS = ("counts", "cost", "time_s", "iterations", "feasible", "budget", "c_min", "c_max")


def cmd_budget(args):
    sc = _scenario(args)
    if sc.budget is None:
        raise UsageError(f"scenario {sc.name!r} has no budget section")
    res, row = _budget_report(sc, args.budget)
    meta = _header(command="budget", scenario=sc.name, seed=args.seed)
    _emit(_table(BUDGET_COLUMNS, [row], meta), args.out)
    if not res.feasible:
        print("infeasible: the budget is below the minimum achievable cost", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_run(args):
    sc = _scenario(args)
    cluster = sc.cluster()
    scheme = Scheme(args.scheme)
    if args.matrix:
        A = read_matrix(args.matrix)
        x = np.random.default_rng(args.seed).standard_normal(A.shape[1])
    else:
        A, x = generate_problem(sc.r, args.size, args.seed)
    r = A.shape[0]
    if not scheme.coded:
        coding, code = UNCODED, None
    elif sc.lt:
        coding, code = LT, robust_soliton(r, sc.coding.c, sc.coding.delta, sc.coding.epsilon)
    else:
        coding, code = RLC, None
    target = code.planned_symbols if code is not None else r
    alloc = allocate(scheme, cluster, target, rng=args.seed, straggler=sc.straggler)
    tamper = (lambda y: y + 1.0) if args.tamper else None
    spec = JobSpec(cluster, alloc.loads, A, x, coding=coding, lt=code, straggler=sc.straggler,
                   seed=args.seed, mode=args.mode, time_scale=args.time_scale, tamper=tamper)
    metrics, _ = run_job(spec)
    header = _header(command="run", scenario=sc.name, seed=args.seed, scheme=scheme.value)
    _emit(metrics.to_csv(header), args.out)
    if not metrics.success:
        print(f"verification failed: relative error {metrics.rel_error!r}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _overhead_rows(k, c, delta, trials, seed, epsilon=None):
    spec = robust_soliton(k, c, delta, 0.0 if epsilon is None else epsilon)
    est = lt_required_overhead(spec, trials, seed)
    row = [k, repr(c), repr(delta), trials, _fmt(est.needed), repr(est.mean), repr(est.needed / k - 1.0)]
    if epsilon is not None:
        row += [spec.planned_symbols, repr(est.rate_at(spec.planned_symbols))]
    else:
        row += ["", ""]
    return est, row


OVERHEAD_COLUMNS = ("k", "c", "delta", "trials", "needed", "mean", "epsilon_needed", "planned", "success_at_planned")


def cmd_overhead(args):
    if args.k < 2:
        raise UsageError("--k must be at least 2")
    _, row = _overhead_rows(args.k, args.c, args.delta, args.trials, args.seed, args.epsilon)
    meta = _header(command="overhead", seed=args.seed, trials=args.trials)
    _emit(_table(OVERHEAD_COLUMNS, [row], meta), args.out)
    return EXIT_OK


def cmd_reproduce(args):
    out = Path(args.out or "results")
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        (out / name).write_text(text, encoding="utf-8")
        written.append(name)

    for name in ("exp-scenario-1", "exp-scenario-2", "exp-scenario-3",
                 "weibull-scenario-1", "weibull-scenario-2", "weibull-scenario-3",
                 "ec2-scenario-1", "ec2-scenario-2", "ec2-scenario-3"):
        sc = BUILTINS[name]
        if args.trials is not None:
            sc = dataclasses.replace(sc, trials=args.trials)
        put(f"{name}.csv", _compare(sc, args.seed, "reproduce").to_csv())

    sc = BUILTINS["budget-1"]
    bs = sc.budget_scenario()
    n1, n2 = bs.available
    grid_cost, grid_time = [], []
    for i in range(1, n1 + 1):
        for j in range(0, n2 + 1):
            grid_cost.append([i, j, repr(hcmm_expected_cost((i, j), bs))])
            grid_time.append([i, j, repr(expected_time((i, j), bs))])
    meta = _header(command="reproduce", scenario=sc.name)
    put("budget-1-cost-grid.csv", _table(("n1", "n2", "cost"), grid_cost, meta))
    put("budget-1-time-grid.csv", _table(("n1", "n2", "time_s"), grid_time, meta))
    for name in ("budget-1", "budget-2"):
        _, row = _budget_report(BUILTINS[name])
        put(f"{name}-search.csv", _table(BUDGET_COLUMNS, [row], _header(command="reproduce", scenario=name)))

    trials = args.overhead_trials
    _, row = _overhead_rows(10000, 0.03, 0.1, trials, args.seed, 0.13)
    put("lt-overhead.csv", _table(OVERHEAD_COLUMNS, [row],
                                  _header(command="reproduce", seed=args.seed, trials=trials)))
    for name in written:
        print(out / name)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_common(p, scenario=True, trials=True):
    if scenario:
        p.add_argument("--scenario", required=True,
                       help=f"builtin name ({', '.join(BUILTINS)}) or path to a JSON scenario file")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    if trials:
        p.add_argument("--trials", type=int, help="override the scenario's trial count")
    p.add_argument("--out", help="output file (default: stdout)")


def _add_model_overrides(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lt", dest="coding", action="store_const", const="lt", help="use LT coding")
    g.add_argument("--rlc", dest="coding", action="store_const", const="rlc", help="use random linear coding")
    p.add_argument("--straggler-p", type=float, help="straggler probability")
    p.add_argument("--slowdown", type=float, help="straggler slowdown factor")


def build_parser():
    parser = argparse.ArgumentParser(prog="hcmm", description="Heterogeneous coded matrix multiplication toolkit.",
                                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"hcmm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    schemes = [s.value for s in Scheme]

    p = sub.add_parser("allocate", help="per-worker loads for a scheme", allow_abbrev=False)
    _add_common(p, trials=False)
    p.add_argument("--scheme", choices=schemes, default=Scheme.HCMM.value)
    p.add_argument("--counts", help="machines per class for budget scenarios, e.g. 10,2")
    p.add_argument("--r", type=int, help="override the number of rows")
    _add_model_overrides(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", help="Monte Carlo completion time of one scheme", allow_abbrev=False)
    _add_common(p)
    p.add_argument("--scheme", choices=schemes, default=Scheme.HCMM.value)
    _add_model_overrides(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare every scheme on common random numbers", allow_abbrev=False)
    _add_common(p)
    _add_model_overrides(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("budget", help="heuristic machine selection under a budget", allow_abbrev=False)
    _add_common(p, trials=False)
    p.add_argument("--budget", type=float, help="override the scenario's budget limit")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("run", help="emulate a coded job end to end", allow_abbrev=False)
    _add_common(p, trials=False)
    p.add_argument("--scheme", choices=schemes, default=Scheme.HCMM.value)
    p.add_argument("--size", type=int, default=100, help="columns of the generated matrix")
    p.add_argument("--matrix", help="matrix file (.csv or binary) instead of a generated one")
    p.add_argument("--mode", choices=(VIRTUAL, THREADS), default=VIRTUAL)
    p.add_argument("--time-scale", type=float, help="wall seconds per modeled second (threads mode)")
    p.add_argument("--tamper", action="store_true", help=argparse.SUPPRESS)
    _add_model_overrides(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("overhead", help="LT symbols needed for peeling to finish", allow_abbrev=False)
    _add_common(p, scenario=False, trials=False)
    p.add_argument("--k", type=int, default=10000)
    p.add_argument("--c", type=float, default=0.03)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--epsilon", type=float, help="also report success at ceil(k(1+epsilon)) symbols")
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_overhead)

    p = sub.add_parser("reproduce", help="write every result table into a directory", allow_abbrev=False)
    _add_common(p, scenario=False)
    p.add_argument("--overhead-trials", type=int, default=100)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("trials", "overhead_trials", "size"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            parser.error(f"--{name.replace('_', '-')} must be at least 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
