"""Command-line front end: ``slscc {solve,gen,check,compare,export}``.

Exit codes: 0 success, 1 input error, 2 no feasible plan, 3 solvers disagree.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Any, Sequence

from .bnb import BnbConfig, ProgressEvent, branch_and_bound
from .errors import (
    AssumptionViolated,
    EmptyJ1,
    EmptySet,
    Infeasible,
    InfeasibleNode,
    InstanceError,
    SlsccError,
    TooLarge,
)
from .formulations import (
    NodeConstraintSet,
    build_c_subproblem,
    build_de,
    build_nslscc,
    build_s_extended,
    build_s_lp,
)
from .lpmodel import dumps_lp
from .model import check_ww, load_instance, random_instance, validate_instance
from .oracle import brute_force, compare_report
from .subproblem import opt_star_enumeration

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_DISAGREE = 0, 1, 2, 3


def fmt(v: float) -> float | int:
    """Round to 9 significant digits for output."""
    out = float(f"{float(v):.9g}")
    return int(out) if out.is_integer() and abs(out) < 1e15 else out


def _round_tree(obj: Any) -> Any:
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    return obj


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("SLSCC_JOBS", "1")))
    except ValueError:
        return 1


def _error(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _load(path: str):
    try:
        return load_instance(path)
    except InstanceError as exc:
        for v in exc.violations:
            _error(v)
    except json.JSONDecodeError as exc:
        _error(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})")
    except OSError as exc:
        _error(f"{path}: {exc.strerror}")
    return None


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args: argparse.Namespace) -> int:
    inst = _load(args.path)
    if inst is None:
        return EXIT_INPUT
    lb = ub = nodes = status = None
    try:
        if args.method == "bnb":
            progress = None
            if args.verbose:
                def progress(ev: ProgressEvent) -> None:
                    print(f"node {ev.node}: lb={ev.lb:.9g} ub={ev.ub:.9g} {ev.action}",
                          file=sys.stderr)
            res = branch_and_bound(
                inst, BnbConfig(args.delta, args.node_cap, args.jobs, progress)
            )
            sol, lb, ub = res.solution, res.lower_bound, res.upper_bound
            nodes, status = res.nodes_expanded, res.status.value
        elif args.method == "enumerate":
            sol = opt_star_enumeration(inst)
        else:
            sol = brute_force(inst)
    except (TooLarge, AssumptionViolated) as exc:
        _error(str(exc))
        return EXIT_INPUT
    except Infeasible as exc:
        _error(f"no feasible plan: {exc}")
        return EXIT_INFEASIBLE
    if lb is None:
        lb = ub = sol.objective
    record = sol.to_dict()
    record.update({"lb": lb, "ub": ub, "nodes": nodes, "status": status or "Proven",
                   "method": args.method})
    sys.stdout.write(render_solution(record, args.output))
    return EXIT_OK


SOLUTION_KEYS = ("objective", "y", "x", "s", "s2", "z", "S", "lb", "ub", "nodes")


def render_solution(record: dict[str, Any], output: str) -> str:
    rec = _round_tree(record)
    if output == "json":
        return json.dumps({k: rec[k] for k in SOLUTION_KEYS + ("status", "method")}, indent=2) + "\n"
    if output == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["field", "value"])
        for k in SOLUTION_KEYS + ("status", "method"):
            v = rec[k]
            if k == "s2":
                v = ";".join(" ".join(str(a) for a in row) for row in v)
            elif isinstance(v, list):
                v = " ".join(str(a) for a in v)
            w.writerow([k, "" if v is None else v])
        return buf.getvalue()
    lines = [
        f"objective: {rec['objective']}",
        f"setups y: {rec['y']}",
        f"production x: {rec['x']}",
        f"first-stage stock s: {rec['s']}",
        "scenario stock:",
        *[f"  scenario {j}: {row}" for j, row in enumerate(rec["s2"])],
        f"dropped z: {rec['z']}",
        f"kept scenarios: {rec['S']}",
        f"bounds: [{rec['lb']}, {rec['ub']}]",
        f"nodes: {rec['nodes']}",
        f"status: {rec['status']} ({rec['method']})",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# gen / check


def cmd_gen(args: argparse.Namespace) -> int:
    if args.T < 1 or not 1 <= args.p <= args.T or args.m < 1:
        _error("need T >= p >= 1 and m >= 1")
        return EXIT_INPUT
    if not 0 <= args.epsilon < 1:
        _error("epsilon must lie in [0, 1)")
        return EXIT_INPUT
    if args.p == args.T and args.m != 1:
        print("warning: p = T leaves no second stage; m is ignored", file=sys.stderr)
    text = random_instance(args.T, args.p, args.m, args.epsilon, args.seed).dumps()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    inst = _load(args.path)
    if inst is None:
        return EXIT_INPUT
    rep = check_ww(inst)
    print(f"instance: valid (T={inst.T}, p={inst.p}, m={inst.m}, epsilon={fmt(inst.epsilon)})")
    print(f"Wagner-Whitin condition: {'holds' if rep.holds else 'fails'}")
    for i, margin in rep.margins.items():
        flag = "  VIOLATED" if i in rep.violations else ""
        print(f"  i={i}: margin {fmt(margin)}{flag}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare / export


def cmd_compare(args: argparse.Namespace) -> int:
    inst = _load(args.path)
    if inst is None:
        return EXIT_INPUT
    try:
        report = compare_report(inst, jobs=args.jobs)
    except TooLarge as exc:
        _error(str(exc))
        return EXIT_INPUT
    except Infeasible as exc:
        _error(f"no feasible plan: {exc}")
        return EXIT_INFEASIBLE
    sys.stdout.write(json.dumps(_round_tree(report), indent=2) + "\n")
    return EXIT_OK if report["agree"] else EXIT_DISAGREE


def _index_list(text: str | None, m: int) -> list[int]:
    if text is None or text.strip() == "":
        return []
    if text.strip().lower() == "all":
        return list(range(m))
    out = []
    for tok in text.split(","):
        j = int(tok)
        if not 0 <= j < m:
            raise ValueError(f"scenario index {j} out of range [0, {m - 1}]")
        out.append(j)
    return out


def cmd_export(args: argparse.Namespace) -> int:
    inst = _load(args.path)
    if inst is None:
        return EXIT_INPUT
    try:
        if args.form == "de":
            model = build_de(inst)
        elif args.form == "nslscc":
            model = build_nslscc(inst)
        elif args.form in ("s-lp", "s-ext"):
            S = _index_list(args.S if args.S is not None else "all", inst.m)
            model = (build_s_lp if args.form == "s-lp" else build_s_extended)(inst, S)
        else:
            C = NodeConstraintSet(_index_list(args.keep, inst.m), _index_list(args.drop, inst.m))
            model = build_c_subproblem(inst, C)
    except (EmptySet, EmptyJ1, InfeasibleNode, ValueError) as exc:
        _error(str(exc) or type(exc).__name__)
        return EXIT_INPUT
    text = dumps_lp(model)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.stats:
        print(json.dumps(model.stats(), sort_keys=True), file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slscc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve an instance file")
    sp.add_argument("path")
    sp.add_argument("--method", choices=("bnb", "enumerate", "brute"), default="bnb")
    sp.add_argument("--delta", type=float, default=None, help="optimality tolerance")
    sp.add_argument("--node-cap", type=int, default=100_000)
    sp.add_argument("--output", choices=("json", "csv", "text"), default="json")
    sp.add_argument("--jobs", type=int, default=_default_jobs())
    sp.add_argument("--verbose", action="store_true", help="log search progress to stderr")
    sp.set_defaults(func=cmd_solve)

    gp = sub.add_parser("gen", help="write a seeded random instance")
    gp.add_argument("--T", type=int, required=True)
    gp.add_argument("--p", type=int, required=True)
    gp.add_argument("--m", type=int, required=True)
    gp.add_argument("--epsilon", type=float, default=0.1)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--out", default=None)
    gp.set_defaults(func=cmd_gen)

    cp = sub.add_parser("check", help="validate a file and test the cost condition")
    cp.add_argument("path")
    cp.set_defaults(func=cmd_check)

    mp = sub.add_parser("compare", help="cross-check all solvers on a small instance")
    mp.add_argument("path")
    mp.add_argument("--jobs", type=int, default=_default_jobs())
    mp.set_defaults(func=cmd_compare)

    ep = sub.add_parser("export", help="write a model as LP text")
    ep.add_argument("path")
    ep.add_argument("--form", choices=("de", "nslscc", "s-lp", "s-ext", "c-sub"), default="de")
    ep.add_argument("--S", default=None, help="kept set: 'all' or comma-separated 0-based indices")
    ep.add_argument("--keep", default=None, help="node: scenarios fixed kept")
    ep.add_argument("--drop", default=None, help="node: scenarios fixed dropped")
    ep.add_argument("--out", default=None)
    ep.add_argument("--stats", action="store_true", help="print model statistics to stderr")
    ep.set_defaults(func=cmd_export)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        _error("--jobs must be positive")
        return EXIT_INPUT
    try:
        return args.func(args)
    except SlsccError as exc:
        _error(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
