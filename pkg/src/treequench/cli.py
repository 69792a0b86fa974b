"""``treequench`` command line.

Exit codes: 0 success, 2 usage or input error, 3 no convergence within the
step cap, 4 a verification check failed.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import dynamics
from .dynamics import StopReason
from .rules import CombineTable, DAry, Mutation, RuleError, Standard, Table
from .sim import SimConfig, run_sim
from .simplex import DEFAULT_TIE_TOL, SimplexError, format_float, make_distribution

EXIT_OK, EXIT_USAGE, EXIT_NOCONV, EXIT_VERIFY = 0, 2, 3, 4
WORKERS_ENV = "TREEQUENCH_WORKERS"


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _distribution(args):
    w = _floats(args.p)
    k = args.k if args.k is not None else len(w) - 1
    return make_distribution(k, w)


def _rules(args):
    name = args.rules
    if name == "standard":
        return Standard()
    if name == "mutation":
        if args.q is None:
            raise UsageError("--rules mutation needs --q")
        return Mutation(args.q)
    if name == "dary":
        if args.d is None:
            raise UsageError("--rules dary needs --d")
        return DAry(args.d)
    if args.table_file is None:
        raise UsageError("--rules table needs --table-file")
    try:
        return Table(CombineTable.load(args.table_file))
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read table {args.table_file}: {exc}") from exc


def _workers(args) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
    else:
        n = args.workers
    if n < 1:
        raise UsageError("workers must be >= 1")
    return n


def _stamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, obj: dict):
    if args.timestamp:
        obj = {**obj, "generated": _stamp()}
    _emit(args, json.dumps(obj, indent=2) + "\n")


def _emit_csv(args, text: str):
    if args.timestamp:
        text = f"# generated {_stamp()}\n" + text
    _emit(args, text)


def _csv_line(values) -> str:
    out = []
    for v in values:
        if isinstance(v, float):
            out.append(format_float(v))
        else:
            out.append(str(v))
    return ",".join(out)


# ---------------------------------------------------------------- commands


def cmd_iterate(args) -> int:
    d0 = _distribution(args)
    rules = _rules(args)
    rec = dynamics.iterate(d0, rules, max_steps=args.steps, conv_tol=args.tol,
                           tie_tol=args.tie_tol)
    if args.format == "json":
        _emit_json(args, rec.to_dict())
    else:
        _emit_csv(args, rec.to_csv())
    return EXIT_OK if rec.stop_reason is StopReason.CONVERGED else EXIT_NOCONV


def cmd_limit(args) -> int:
    d0 = _distribution(args)
    rules = _rules(args)
    if isinstance(rules, (DAry, Table)):
        raise UsageError(f"no closed form for {rules} rules")
    cls = dynamics.classify_limit(d0, rules, tie_tol=args.tie_tol)
    out = cls.to_dict()
    out["rules"] = str(rules)
    status = EXIT_OK
    if args.verify:
        it, steps, reason = dynamics.iterate_limit(d0, rules, args.steps, args.tol)
        gap = cls.limit.sup_distance(it)
        out.update(iterated=list(it.weights), steps=steps, stop_reason=reason.value,
                   discrepancy=gap, verify_tol=args.verify_tol)
        if gap > args.verify_tol:
            status = EXIT_VERIFY
    if args.format == "csv":
        k = d0.k
        head = ["case"] + [f"limit{i}" for i in range(1, k + 2)]
        row = [cls.case] + list(cls.limit.weights)
        if args.verify:
            head += [f"iter{i}" for i in range(1, k + 2)] + ["discrepancy"]
            row += out["iterated"] + [out["discrepancy"]]
        _emit_csv(args, ",".join(head) + "\n" + _csv_line(row) + "\n")
    else:
        _emit_json(args, out)
    return status


def cmd_simulate(args) -> int:
    d0 = _distribution(args)
    rules = _rules(args)
    try:
        cfg = SimConfig(args.height, args.samples, args.seed, _workers(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    hist = run_sim(d0, rules, cfg)
    exact = dynamics.evolve(d0, rules, cfg.height)
    tv = hist.tv_distance(exact)
    if args.format == "csv":
        k1 = d0.k + 1
        head = ([f"count{i}" for i in range(1, k1 + 1)] + ["total"]
                + [f"empirical{i}" for i in range(1, k1 + 1)]
                + [f"exact{i}" for i in range(1, k1 + 1)] + ["tv_distance"])
        row = list(hist.counts) + [hist.total] + list(hist.empirical.weights) \
            + list(exact.weights) + [tv]
        _emit_csv(args, ",".join(head) + "\n" + _csv_line(row) + "\n")
    else:
        out = hist.to_dict()
        out.update(height=cfg.height, seed=cfg.master_seed, rules=str(rules),
                   exact=list(exact.weights), tv_distance=tv)
        _emit_json(args, out)
    return EXIT_OK


def phase_grid(resolution: int, include_boundary: bool = False):
    """Barycentric points ``(a, b, c) / resolution`` of the k=2 simplex."""
    pts = []
    for a in range(resolution + 1):
        for b in range(resolution + 1 - a):
            c = resolution - a - b
            if not include_boundary and 0 in (a, b, c):
                continue
            pts.append((a / resolution, b / resolution, c / resolution))
    return pts


def _q_values(args) -> list[float]:
    if args.q_values:
        qs = _floats(args.q_values)
    elif args.q_steps == 1:
        qs = [args.q_min]
    else:
        n = args.q_steps
        qs = [args.q_min + (args.q_max - args.q_min) * i / (n - 1) for i in range(n)]
    for q in qs:
        if not 0.0 < q < 1.0:
            raise UsageError(f"q values must lie in (0,1), got {q!r}")
    return qs


def phase_rows(qs, points, mode, tie_tol, max_steps, conv_tol, agree_tol, workers=1):
    """Rows of the phase sweep in grid order; ``mode`` is predicted, iterated or both."""
    tasks = [(q, p) for q in qs for p in points]

    def one(task):
        q, p = task
        rules = Mutation(q)
        d0 = make_distribution(2, p)
        row = [q, *d0.weights]
        pred = None
        if mode in ("predicted", "both"):
            pred = dynamics.classify_limit(d0, rules, tie_tol)
            row += [pred.case, *pred.limit.weights]
        if mode in ("iterated", "both"):
            it, steps, reason = dynamics.iterate_limit(d0, rules, max_steps, conv_tol)
            row += [*it.weights]
            if pred is None:
                row += [steps, reason.value]
            else:
                gap = pred.limit.sup_distance(it)
                boundary = abs(d0[0] - d0[1]) <= tie_tol
                row += [gap, int(gap <= agree_tol), int(boundary)]
        return row

    if workers == 1:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, tasks))


def phase_header(mode: str) -> list[str]:
    head = ["q", "p1", "p2", "p3"]
    if mode in ("predicted", "both"):
        head += ["case", "limit1", "limit2", "limit3"]
    if mode in ("iterated", "both"):
        head += ["iter1", "iter2", "iter3"]
        head += ["steps", "stop_reason"] if mode == "iterated" else ["distance", "agree", "boundary"]
    return head


def cmd_phase(args) -> int:
    if args.resolution < 1:
        raise UsageError("--resolution must be >= 1")
    qs = _q_values(args)
    pts = phase_grid(args.resolution, args.include_boundary)
    rows = phase_rows(qs, pts, args.mode, args.tie_tol, args.steps, args.tol,
                      args.agree_tol, _workers(args))
    head = phase_header(args.mode)
    if args.format == "json":
        _emit_json(args, {"columns": head, "rows": rows})
    else:
        _emit_csv(args, ",".join(head) + "\n" + "".join(_csv_line(r) + "\n" for r in rows))
    return EXIT_OK


def cmd_converge(args) -> int:
    if args.z0 is not None:
        z0 = args.z0
        steps = args.steps if args.steps is not None else 10
    else:
        z0 = dynamics.target_z0(args.target_n)
        steps = args.steps if args.steps is not None else args.target_n
    try:
        rep = dynamics.convergence_rate_experiment(z0, steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.format == "json":
        _emit_json(args, rep.to_dict())
    else:
        _emit_csv(args, rep.to_csv())
    return EXIT_OK if rep.holds else EXIT_VERIFY


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser, fmt: str):
    p.add_argument("--out", help="write to FILE instead of stdout")
    p.add_argument("--format", choices=["csv", "json"], default=fmt)
    p.add_argument("--timestamp", action="store_true", help="add a generation timestamp")


def _model(p: argparse.ArgumentParser):
    p.add_argument("--k", type=int, help="number of infection states (default: len(p)-1)")
    p.add_argument("--p", required=True, help="leaf law, k+1 comma-separated weights, empty last")
    p.add_argument("--rules", choices=["standard", "mutation", "dary", "table"], default="standard")
    p.add_argument("--q", type=float, help="retention probability for mutation rules")
    p.add_argument("--d", type=int, help="arity for d-ary rules")
    p.add_argument("--table-file", help="JSON combine table {k, entries}")


def _iteration(p: argparse.ArgumentParser):
    p.add_argument("--steps", type=int, default=dynamics.DEFAULT_MAX_STEPS)
    p.add_argument("--tol", type=float, default=dynamics.DEFAULT_CONV_TOL)
    p.add_argument("--tie-tol", type=float, default=DEFAULT_TIE_TOL)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treequench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("iterate", help="iterate the exact map and print the trajectory")
    _model(p)
    _iteration(p)
    _common(p, "csv")
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("limit", help="closed-form limit of p(n)")
    _model(p)
    _iteration(p)
    p.add_argument("--verify", action="store_true", help="also iterate and report the gap")
    p.add_argument("--verify-tol", type=float, default=1e-6)
    _common(p, "json")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("simulate", help="Monte Carlo root histogram vs the exact law")
    _model(p)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _common(p, "json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("phase", help="limit over a (q, p) grid for mutation rules")
    p.add_argument("--q-min", type=float, default=0.25)
    p.add_argument("--q-max", type=float, default=0.9)
    p.add_argument("--q-steps", type=int, default=5)
    p.add_argument("--q-values", help="explicit comma-separated q list (overrides the range)")
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--mode", choices=["predicted", "iterated", "both"], default="predicted")
    p.add_argument("--include-boundary", action="store_true")
    p.add_argument("--agree-tol", type=float, default=1e-6)
    p.add_argument("--workers", type=int, default=1)
    _iteration(p)
    _common(p, "csv")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("converge", help="z(n) against the bound z(0)^(2^n)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--z0", type=float)
    g.add_argument("--target-n", type=int, help="use z0 = 2^(-2^(-n))")
    p.add_argument("--steps", type=int)
    _common(p, "csv")
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SimplexError, RuleError, ValueError) as exc:
        print(f"treequench {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
