"""Command line entry point.

Exit status: 0 on success, 1 when an audit or decode check fails, 2 on
usage errors (bad parameters, non-uniform plans, unreadable files).

Options may also come from a ``--config`` file of ``key = value`` lines
(``#`` starts a comment). Keys are the long option names without dashes,
e.g. ``N``, ``K``, ``M``, ``theta``, ``seed``, ``format``, ``plan``,
``width``, ``jobs``. Command line flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from .combinatorics import capacity, min_field_width, optimal_cost, scheme_counts
from .engine import MessageStore, SystemConfig, run_retrieval
from .errors import PIRError
from .scheme import PrefetchPlan, build_query_table, uniform_prefetch

DEFAULTS = {"seed": 0, "format": "text", "jobs": 1, "M": 0}


class UsageError(Exception):
    pass


def read_config(path: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _emit(args, text: str, data, rows: list[list] | None = None) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=2, sort_keys=True))
    elif args.format == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows or [])
        sys.stdout.write(buf.getvalue())
    else:
        print(text)


def _load_plan(args) -> PrefetchPlan:
    if args.plan:
        try:
            plan = PrefetchPlan.from_dict(json.loads(Path(args.plan).read_text()))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read plan file {args.plan}: {exc}") from exc
        return plan
    return uniform_prefetch(args.N, args.K, args.M, args.seed)


def _pick_theta(args, plan: PrefetchPlan) -> int:
    if args.theta is not None:
        return args.theta
    choices = [k for k in range(1, args.K + 1) if k not in plan.cached]
    rng = np.random.default_rng([args.seed, 7])
    return int(rng.choice(choices))


def cmd_capacity(args) -> int:
    d = optimal_cost(args.N, args.K, args.M)
    c = capacity(args.N, args.K, args.M)
    text = f"D* = {d}, C = {c}\nD* ~ {float(d):.6f}, C ~ {float(c):.6f}"
    data = {"N": args.N, "K": args.K, "M": args.M, "D": str(d), "C": str(c),
            "D_decimal": float(d), "C_decimal": float(c)}
    _emit(args, text, data, [["N", "K", "M", "D", "C"], [args.N, args.K, args.M, d, c]])
    return 0


def cmd_counts(args) -> int:
    counts = scheme_counts(args.N, args.K, args.M)
    data = counts.as_dict() | {"min_width": min_field_width(counts), "cost": str(counts.cost)}
    text = "\n".join(f"{k} = {v}" for k, v in data.items())
    _emit(args, text, data, [list(data), list(data.values())])
    return 0


def cmd_table(args) -> int:
    plan = _load_plan(args)
    theta = _pick_theta(args, plan)
    table = build_query_table(args.N, args.K, args.M, theta, plan, args.seed, args.mutate)
    title = (f"query table N={args.N} K={args.K} M={args.M} theta={theta} seed={args.seed}"
             + (" (construction order, virtual indices)" if args.canonical else ""))
    text = title + "\n" + table.render(canonical=args.canonical)
    rows = [[f"DB{n}" for n in range(1, args.N + 1)]]
    cols = [table.canonical[n] if args.canonical else table.queries[n]
            for n in range(1, args.N + 1)]
    for i in range(table.counts.p):
        rows.append([(c[i].spec if args.canonical else c[i]).render() for c in cols])
    _emit(args, text, table.to_dict(), rows)
    return 0


def cmd_retrieve(args) -> int:
    plan = _load_plan(args)
    theta = _pick_theta(args, plan)
    if theta in plan.cached:
        raise UsageError(f"theta={theta} is already cached")
    cfg = SystemConfig(args.N, args.K, args.M, width=args.width, seed=args.seed)
    width = cfg.field_width()
    store = MessageStore.random(args.K, cfg.counts.L, width, seed=[args.seed, 11])
    tr = run_retrieval(cfg, plan, theta, store, jobs=args.jobs, mutation=args.mutate)
    status = "decode OK" if tr.decode_ok else "decode FAILED"
    text = (f"N={args.N} K={args.K} M={args.M} theta={theta} plan={plan.to_dict()} "
            f"GF(2^{width})\n"
            f"downloaded {tr.downloaded_symbols} of L={tr.L} -> {tr.ratio}, {status}")
    data = tr.to_dict()
    if args.output:
        Path(args.output).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    _emit(args, text, data, [["key", "value"]] + [[k, v] for k, v in data.items()
                                                 if not isinstance(v, dict)])
    return 0 if tr.decode_ok else 1


def _parse_grid(tokens: list[str]) -> list[tuple[int, int, int]]:
    values: dict[str, list[int]] = {}
    for tok in tokens:
        if "=" not in tok:
            raise UsageError(f"grid entries look like N=2 or K=2,3,4; got {tok!r}")
        key, vals = tok.split("=", 1)
        if key not in ("N", "K", "M", "m"):
            raise UsageError(f"unknown grid key {key!r}")
        values[key] = [int(v) for v in vals.split(",")]
    if "M" in values and "m" in values:
        raise UsageError("give either M or m, not both")
    Ns = values.get("N", [2, 3])
    Ks = values.get("K", list(range(2, 6)))
    if "M" in values:
        return [(N, K, M) for N in Ns for K in Ks for M in values["M"]]
    return audit_mod.default_grid(Ns, Ks, values.get("m", [0, 1]))


def cmd_audit(args) -> int:
    points = _parse_grid(args.grid) if args.grid else audit_mod.default_grid()
    for N, K, M in points:
        scheme_counts(N, K, M)
    modes = {"capacity", "structural", "statistical"} if args.mode == "all" else {args.mode}
    report: dict = {"points": [list(p) for p in points]}
    lines = []
    ok = True

    if "capacity" in modes:
        grid = audit_mod.audit_capacity_grid(points, trials=args.trials, seed=args.seed,
                                             jobs=args.jobs, mutation=args.mutate)
        report["capacity"] = grid.to_dict()
        lines.append(grid.summary())
        ok &= grid.passed

    if "structural" in modes:
        report["structural"] = []
        for N, K, M in points:
            for n in range(1, N + 1):
                try:
                    r = audit_mod.audit_privacy_structural(N, K, M, n, mutation=args.mutate,
                                                           seed=args.seed)
                except PIRError as exc:
                    lines.append(f"privacy/structural N={N} K={K} M={M} DB{n}: skipped ({exc})")
                    continue
                report["structural"].append({"point": [N, K, M]} | r.to_dict())
                lines.append(f"N={N} K={K} M={M} " + r.summary())
                for problem in r.details["problems"][:3]:
                    lines.append("    " + problem)
                ok &= r.passed

    if "statistical" in modes:
        report["statistical"] = []
        stat_points = points if args.grid else [(2, 2, 0), (2, 4, 2)]
        for N, K, M in stat_points:
            for n in range(1, N + 1):
                try:
                    r = audit_mod.audit_privacy_statistical(
                        N, K, M, n, samples=args.samples, alpha=args.alpha,
                        seed=args.seed, mutation=args.mutate)
                except PIRError as exc:
                    lines.append(f"privacy/statistical N={N} K={K} M={M} DB{n}: skipped ({exc})")
                    continue
                report["statistical"].append({"point": [N, K, M]} | r.to_dict())
                extra = ""
                if "min_p_value" in r.details:
                    extra = (f" (min p={r.details['min_p_value']:.3g} at "
                             f"{r.details['worst_feature']}, threshold {r.details['threshold']:.3g})")
                lines.append(f"N={N} K={K} M={M} " + r.summary() + extra)
                ok &= r.passed

    report["passed"] = bool(ok)
    lines.append("audit " + ("PASSED" if ok else "FAILED"))
    rows = [["line"]] + [[ln] for ln in lines]
    _emit(args, "\n".join(lines), report, rows)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sidepir",
        description="PIR with partially known private side information",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-N", type=int, help="number of databases")
    common.add_argument("-K", type=int, help="number of messages")
    common.add_argument("-M", type=int, help="cache size in messages")
    common.add_argument("--seed", type=int, help="randomness seed (default 0)")
    common.add_argument("--format", choices=["text", "json", "csv"])
    common.add_argument("--config", help="key = value file with default options")

    retrieval = argparse.ArgumentParser(add_help=False)
    retrieval.add_argument("--theta", type=int, help="desired message (random if omitted)")
    retrieval.add_argument("--plan", help="JSON prefetch plan: {\"1\": [3], \"2\": [4]}")
    retrieval.add_argument("--mutate", choices=["skip-subset", "no-shuffle", "reuse-index"],
                           help=argparse.SUPPRESS)
    retrieval.add_argument("--jobs", type=int, help="worker threads")

    p = sub.add_parser("capacity", parents=[common], help="optimal cost D* and capacity")
    p.set_defaults(func=cmd_capacity)
    p = sub.add_parser("counts", parents=[common], help="p, q, L and code geometry")
    p.set_defaults(func=cmd_counts)
    p = sub.add_parser("table", parents=[common, retrieval], help="print a query table")
    p.add_argument("--canonical", action="store_true",
                   help="show construction order with virtual symbol indices")
    p.set_defaults(func=cmd_table)
    p = sub.add_parser("retrieve", parents=[common, retrieval], help="run one retrieval")
    p.add_argument("--width", type=int, help="field width override")
    p.add_argument("--output", help="write the transcript JSON here")
    p.set_defaults(func=cmd_retrieve)
    p = sub.add_parser("audit", parents=[common], help="privacy and capacity audits")
    p.add_argument("--grid", nargs="+", metavar="KEY=VALUES",
                   help="e.g. N=2 K=4 M=2, or N=2,3 K=2,3,4 m=0,1")
    p.add_argument("--mode", choices=["all", "capacity", "structural", "statistical"],
                   default="all")
    p.add_argument("--trials", type=int, default=5, help="random stores per grid point")
    p.add_argument("--samples", type=int, default=audit_mod.DEFAULT_SAMPLES)
    p.add_argument("--alpha", type=float, default=audit_mod.DEFAULT_ALPHA)
    p.add_argument("--jobs", type=int, help="worker threads")
    p.add_argument("--mutate", choices=["skip-subset", "no-shuffle", "reuse-index"],
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_audit)
    return parser


_TYPES = {"N": int, "K": int, "M": int, "seed": int, "theta": int, "width": int, "jobs": int}


def _apply_config(args, parser) -> None:
    if args.config:
        try:
            values = read_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        for key, raw in values.items():
            if not hasattr(args, key):
                raise UsageError(f"unknown config key {key!r}")
            if getattr(args, key) is None:
                try:
                    setattr(args, key, _TYPES.get(key, str)(raw))
                except ValueError as exc:
                    raise UsageError(f"bad value for {key}: {raw!r}") from exc
    for key, value in DEFAULTS.items():
        if getattr(args, key, value) is None:
            setattr(args, key, value)
    if args.command != "audit":
        for key in ("N", "K"):
            if getattr(args, key) is None:
                parser.error(f"-{key} is required")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, parser)
        return args.func(args)
    except (UsageError, PIRError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
