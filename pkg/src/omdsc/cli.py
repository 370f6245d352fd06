"""Command-line front end.

    omdsc classify <penalty>
    omdsc opt <instance.json> [--brute-force]
    omdsc run --algorithm SPEC --source SPEC [--penalty P]
    omdsc duel SPEC SPEC [--penalty P]
    omdsc sweep --k 16,81,256 --trials 3
    omdsc validate

Penalties are given as ``one``, ``multiples:k``, ``zeros:2,3``,
``ceil_div:k``, ``linear`` or a path to a penalty JSON file.  Every flag can
also come from a JSON object passed with ``--config``; flags on the command
line win.  ``OMDSC_BACKEND`` sets the default backend.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import random
import statistics
import sys
from fractions import Fraction

from .adversaries import LowerBoundAdversary, MarAdversary, PoissonSource, parse_source
from .algorithms import RecurringAlgorithm, parse_algorithm
from .engine import DEFAULT_MAX_EVENTS, Instance, ProtocolError, run
from .numerics import competitive_ratio, format_scalar, get_backend, log_ratio_unit, solve_alpha
from .offline import brute_force_opt, optimal_cost_dp
from .penalty import PenaltyFunction, PenaltyModeError, classify

SWEEP_COLUMNS = ["k", "alpha_used", "source", "trials", "requests_mean", "alg_mean", "opt_mean",
                 "ratio_mean", "ratio_max", "log_unit", "ratio_over_log_unit", "violations"]


def parse_penalty(spec: str) -> PenaltyFunction:
    name, _, arg = spec.partition(":")
    if name == "one":
        return PenaltyFunction.constant_one()
    if name == "multiples":
        return PenaltyFunction.multiples_of(int(arg))
    if name == "zeros":
        return PenaltyFunction.from_zeros([int(z) for z in arg.split(",")])
    if name == "ceil_div":
        return PenaltyFunction.ceil_div(int(arg))
    if name == "linear":
        return PenaltyFunction.linear()
    if os.path.exists(spec):
        with open(spec) as fh:
            data = json.load(fh)
        return PenaltyFunction.from_json(data.get("penalty", data))
    raise ValueError(f"unrecognised penalty {spec!r}")


def _ratio_text(r) -> str:
    if r == math.inf:
        return "inf"
    return format_scalar(r) if isinstance(r, (Fraction, int)) else repr(float(r))


def _emit(args, payload, rows=None, columns=None):
    """Write a JSON payload, or CSV rows when --format csv and rows are given."""
    if args.format == "csv" and rows is not None:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# commands -----------------------------------------------------------------

def cmd_classify(args) -> int:
    f = parse_penalty(args.penalty)
    cls = classify(f)
    line = f"{cls.label}: {cls.regime}"
    if args.format == "json":
        _emit(args, {"case": cls.variant, "k": cls.k, "zeros": list(cls.zeros), "label": cls.label,
                     "regime": cls.regime})
    else:
        print(line)
    return 0


def cmd_opt(args) -> int:
    backend = get_backend(args.backend)
    with open(args.instance) as fh:
        inst = Instance.from_json(json.load(fh), backend)
    sol = brute_force_opt(inst) if args.brute_force else optimal_cost_dp(inst)
    _emit(args, sol.to_json())
    return 0


def _build(args):
    penalty = parse_penalty(args.penalty) if args.penalty else None
    source = parse_source(args.source, penalty)
    algorithm = parse_algorithm(args.algorithm)
    return algorithm, source, penalty


def _simulate(args, algorithm, source, penalty):
    return run(algorithm, source, penalty=penalty, backend=args.backend, max_events=args.horizon_events)


def cmd_run(args) -> int:
    algorithm, source, penalty = _build(args)
    tr = _simulate(args, algorithm, source, penalty)
    rows = [{"t": format_scalar(m.time), "size": m.size, "size_cost": format_scalar(m.size_cost), "first": m.first}
            for m in tr.matches]
    _emit(args, tr.to_json(), rows, ["t", "size", "size_cost", "first"])
    return 0


def _violations(tr) -> dict:
    out = {}
    for side in ("algorithm", "source"):
        diag = tr.diagnostics.get(side) or {}
        if "violation_count" in diag:
            out[side] = {"count": diag["violation_count"], "first": diag["violations"][:3]}
    return out


def cmd_duel(args) -> int:
    algorithm, source, penalty = _build(args)
    tr = _simulate(args, algorithm, source, penalty)
    opt = optimal_cost_dp(tr.instance)
    ratio = competitive_ratio(tr.cost, opt.cost)
    checks = _violations(tr)
    failed = sum(v["count"] for v in checks.values())
    report = {
        "algorithm": tr.algorithm,
        "source": tr.source,
        "backend": tr.backend,
        "termination": tr.termination,
        "requests": tr.instance.m,
        "matches": len(tr.matches),
        "alg_cost": format_scalar(tr.cost),
        "opt_cost": format_scalar(opt.cost),
        "ratio": _ratio_text(ratio),
        "ratio_float": None if ratio == math.inf else float(ratio),
        "invariant_checks": checks,
        "digest": tr.digest(),
    }
    src = tr.diagnostics.get("source") or {}
    if "n_star" in src:
        report["n_star"] = src["n_star"]
    _emit(args, report)
    if failed:
        print(f"{failed} invariant violations", file=sys.stderr)
        return 1
    return 0


def sweep_rows(ks, trials: int, seed: int, backend="exact", max_events=DEFAULT_MAX_EVENTS,
               mar_limit: int = 100) -> list:
    """Recurring algorithm against the lower-bound, mar and Poisson sources for each k."""
    rows = []
    rng = random.Random(seed)
    for k in ks:
        if k < 2:
            raise ValueError("every k must be at least 2")
        alpha = solve_alpha(k)
        f = PenaltyFunction.multiples_of(k)
        sources = []
        if alpha.alpha_used ** 2 <= k:
            sources.append(("lb", [LowerBoundAdversary(k)]))
        if k <= mar_limit:
            sources.append(("mar", [MarAdversary(k)]))
        sources.append(("poisson", [PoissonSource(Fraction(k, 4), 4 * k, rng.randrange(2 ** 32), f)
                                    for _ in range(trials)]))
        unit = log_ratio_unit(k)
        for label, batch in sources:
            ratios, algs, opts, sizes, violations = [], [], [], [], 0
            for src in batch:
                tr = run(RecurringAlgorithm(k), src, backend=backend, max_events=max_events)
                opt = optimal_cost_dp(tr.instance)
                ratios.append(float(competitive_ratio(tr.cost, opt.cost)))
                algs.append(float(tr.cost))
                opts.append(float(opt.cost))
                sizes.append(tr.instance.m)
                violations += tr.diagnostics["algorithm"]["violation_count"]
            mean = statistics.fmean(ratios)
            rows.append({
                "k": k,
                "alpha_used": float(alpha.alpha_used),
                "source": label,
                "trials": len(batch),
                "requests_mean": round(statistics.fmean(sizes), 3),
                "alg_mean": round(statistics.fmean(algs), 6),
                "opt_mean": round(statistics.fmean(opts), 6),
                "ratio_mean": round(mean, 6),
                "ratio_max": round(max(ratios), 6),
                "log_unit": round(unit, 6),
                "ratio_over_log_unit": round(mean / unit, 6),
                "violations": violations,
            })
    return rows


def cmd_sweep(args) -> int:
    ks = [int(x) for x in str(args.k).split(",") if x]
    rows = sweep_rows(ks, args.trials, args.seed, args.backend, args.horizon_events, args.mar_limit)
    _emit(args, {"columns": SWEEP_COLUMNS, "rows": rows}, rows, SWEEP_COLUMNS)
    return 1 if any(r["violations"] for r in rows) else 0


def cmd_validate(args) -> int:
    from .acceptance import run_all

    results = run_all(seed=args.seed, report=lambda line: print(line, file=sys.stderr))
    failed = [r for r in results if not r.passed]
    summary = {"passed": len(results) - len(failed), "failed": len(failed),
               "criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "detail": r.detail,
                             "seconds": round(r.seconds, 3)} for r in results]}
    _emit(args, summary, summary["criteria"], ["number", "title", "passed", "detail", "seconds"])
    return 1 if failed else 0


# parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=["exact", "float"],
                        default=os.environ.get("OMDSC_BACKEND", "exact"))
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--horizon-events", type=int, default=DEFAULT_MAX_EVENTS,
                        help="stop after this many events and flush the remaining requests")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--config", help="JSON file whose keys mirror the long flags")

    parser = argparse.ArgumentParser(prog="omdsc", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="report the case and competitive regime of a penalty")
    p.add_argument("penalty")
    p.set_defaults(func=cmd_classify, format="text")

    p = sub.add_parser("opt", parents=[common], help="offline optimum of an instance file")
    p.add_argument("instance")
    p.add_argument("--brute-force", action="store_true")
    p.set_defaults(func=cmd_opt)

    for name, func, helptext in (("run", cmd_run, "simulate and print the transcript"),
                                 ("duel", cmd_duel, "simulate, then compare with the offline optimum")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("algorithm_pos", nargs="?", metavar="ALGORITHM")
        p.add_argument("source_pos", nargs="?", metavar="SOURCE")
        p.add_argument("--algorithm")
        p.add_argument("--source")
        p.add_argument("--penalty")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", parents=[common], help="recurring algorithm across several k")
    p.add_argument("--k", default="16,81,256,625")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--mar-limit", type=int, default=100, help="skip the mar source above this k")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", parents=[common], help="run the acceptance suite")
    p.set_defaults(func=cmd_validate)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            parser.error("--config must hold a JSON object")
        defaults = {key.replace("-", "_"): value for key, value in config.items()}
        # re-parse so explicit flags override the file
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(defaults) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if args.command in ("run", "duel"):
        args.algorithm = args.algorithm or args.algorithm_pos
        args.source = args.source or args.source_pos
        if not args.algorithm or not args.source:
            parser.error(f"{args.command} needs an algorithm and a source")
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        return args.func(args)
    except (ProtocolError, PenaltyModeError, ValueError, OSError) as exc:
        print(f"omdsc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
