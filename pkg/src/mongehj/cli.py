"""Command-line front end: audit, solve, check, converge.

Exit codes: 0 pass, 1 verdict fail, 2 audit/hypothesis fail, 3 no oracle,
64 usage, 65 integrity, 74 I/O.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .expressions import ExpressionError
from .fieldio import IntegrityError, read_field, write_field, write_json, write_table
from .graph import GraphError
from .hamiltonian import CoercivityError, DomainError
from .monge import estimate_k, monge_residual
from .problem import NoOracleError, Problem, ProblemError
from .solver import ConfigError, HypothesisError, InputError, RadiusError, dpp_residual
from .verifier import (VerdictReport, check_bounds, check_initial_layer, check_lipschitz, comparison_experiment,
                       convergence_study, curve_residual, equivalence_crosscheck, predicted_K)

EXIT_OK, EXIT_FAIL, EXIT_AUDIT, EXIT_NO_ORACLE = 0, 1, 2, 3
EXIT_USAGE, EXIT_INTEGRITY, EXIT_IO = 64, 65, 74

KINDS = ("bounds", "initial", "lipschitz", "monge", "curve", "comparison", "equivalence", "dpp")
MONGE_MEDIAN_TOL, MONGE_MAX_TOL = 0.1, 0.3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def parse_grids(text: str) -> list[tuple[float, float]]:
    grids = []
    for item in text.split(","):
        try:
            h, dt = item.split(":")
            grids.append((float(_frac(h)), float(_frac(dt))))
        except ValueError as exc:
            raise UsageError(f"bad grid {item!r}; expected h:dt") from exc
    return grids


def _frac(s: str) -> float:
    s = s.strip()
    if "/" in s:
        num, den = s.split("/")
        return float(num) / float(den)
    return float(s)


def parse_kinds(text: str) -> list[str]:
    if text == "all":
        return list(KINDS)
    kinds = [k.strip() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in KINDS]
    if bad or not kinds:
        raise UsageError(f"unknown kind(s) {', '.join(bad) or '(none)'}; choose from {', '.join(KINDS)}")
    return kinds


def load_problem(path: str, threads: int = 1) -> Problem:
    try:
        problem = Problem.load(path)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON ({exc})") from exc
    if threads > 1:
        problem = dataclasses.replace(problem, solver={**problem.solver, "threads": threads})
    return problem


def field_constants(problem: Problem, field) -> dict:
    view = problem.view
    k = estimate_k(field, problem.spec.f if field.meta.get("route") == "eikonal" else None).k
    return {"L0": view.L0, "L1": view.L1, "R": field.meta.get("R"), "k": k, "K": predicted_K(field, problem)}


# commands ----------------------------------------------------------------------


def cmd_audit(args) -> int:
    problem = load_problem(args.config)
    audit = problem.audit
    report = audit.to_json()
    try:
        route = problem.resolved_route()
        report["resolved_route"], code = route, EXIT_OK
    except HypothesisError as exc:
        report["resolved_route"], code = None, EXIT_AUDIT
        print(str(exc), file=sys.stderr)
    out = Path(args.out) / "audit.json" if args.out else None
    if out:
        write_json(out, report)
    print(json.dumps({"route": report["resolved_route"],
                      "verdicts": {k: v["pass"] for k, v in report["verdicts"].items()}}))
    return code


def cmd_solve(args) -> int:
    if not args.out:
        raise UsageError("solve needs --out DIR")
    problem = load_problem(args.config, args.threads)
    field = problem.solve()
    write_field(field, args.out, field_constants(problem, field))
    print(f"wrote {field.grid.n_steps} slices to {args.out} (route {field.meta['route']}, R = {field.meta['R']:g})")
    return EXIT_OK


def _monge_verdict(field, problem: Problem, out: Path | None) -> VerdictReport:
    rep = monge_residual(field, problem.spec, field.meta.get("route"))
    if out:
        write_json(out / "monge_residual.json", rep.to_json())
    ok = rep.median_abs <= MONGE_MEDIAN_TOL and rep.max_abs <= MONGE_MAX_TOL
    witnesses = []
    if not ok:
        i = int(np.argmax(np.abs(rep.residual)))
        x = int(rep.node[i])
        witnesses.append({"id": x, "edge": int(field.mesh.edge[x]), "offset": float(field.mesh.offset[x]),
                          "t": float(rep.t[i]), "estimate": float(rep.estimate[i]), "target": float(rep.target[i])})
    meas = {"k": rep.k, "median_abs": rep.median_abs, "max_abs": rep.max_abs, "deltas": rep.deltas,
            "median_tol": MONGE_MEDIAN_TOL, "max_tol": MONGE_MAX_TOL,
            "plateau_fraction": float(np.mean(rep.plateau_ok)) if len(rep.node) else 1.0}
    return VerdictReport("monge", ok, meas, witnesses, problem.digest())


def _dpp_verdict(field, problem: Problem, seed: int) -> VerdictReport:
    rep = dpp_residual(field, problem.spec, seed=seed)
    ok = rep.max_abs <= 1e-12
    worst = max(rep.points, key=lambda p: abs(p["residual"]))
    return VerdictReport("dpp", ok, {"max_abs": rep.max_abs, "median_abs": rep.median_abs},
                         [] if ok else [worst], problem.digest(), seed)


def run_kind(kind: str, field, problem: Problem, seed: int, grids, out: Path | None) -> VerdictReport:
    if kind == "bounds":
        return check_bounds(field, problem)
    if kind == "initial":
        return check_initial_layer(field, problem)
    if kind == "lipschitz":
        return check_lipschitz(field, problem)
    if kind == "monge":
        return _monge_verdict(field, problem, out)
    if kind == "curve":
        return curve_residual(field, problem, seed=seed)
    if kind == "comparison":
        return comparison_experiment(problem, field=field, seed=seed)
    if kind == "equivalence":
        grids = grids or [(problem.h, problem.dt), (problem.h / 2, problem.dt / 2)]
        return equivalence_crosscheck(problem, grids, seed=seed)
    if kind == "dpp":
        return _dpp_verdict(field, problem, seed)
    raise UsageError(f"unknown kind {kind!r}")


def cmd_check(args) -> int:
    kinds = parse_kinds(args.kinds)
    grids = parse_grids(args.grids) if args.grids else None
    if not args.field:
        raise UsageError("check needs --field DIR")
    problem = load_problem(args.config, args.threads)
    field = read_field(args.field, problem.mesh)
    field.meta.setdefault("route", problem.resolved_route())
    out = Path(args.out) if args.out else Path(args.field) / "verdicts"
    failed = []
    for kind in kinds:
        rep = run_kind(kind, field, problem, args.seed, grids, out)
        if rep.seed is None:
            rep.seed = args.seed
        write_json(out / f"{kind}.json", rep.to_json())
        print(f"{kind:12s} {'PASS' if rep.passed else 'FAIL'}")
        if not rep.passed:
            failed.append(kind)
            for w in rep.witnesses[:3]:
                print(f"  witness: {json.dumps(w, default=float)}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_converge(args) -> int:
    problem = load_problem(args.config, args.threads)
    grids = parse_grids(args.grids) if args.grids else [(problem.h, problem.dt)]
    problem.oracle_kind()
    rows, rate = convergence_study(problem, grids)
    for r in rows:
        r["rate"] = "n/a" if rate is None else r["rate"]
    out = Path(args.out) if args.out else Path(".")
    write_table(out / "convergence.csv", rows)
    for r in rows:
        print(f"h={r['h']:g} dt={r['dt']:g} max_error={r['max_error']:.3e}")
    print(f"observed rate: {'n/a' if rate is None else f'{rate:.3f}'}")
    return EXIT_OK


COMMANDS = {"audit": cmd_audit, "solve": cmd_solve, "check": cmd_check, "converge": cmd_converge}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mongehj", description="Hamilton-Jacobi solver and Monge-solution checker on metric graphs.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="problem config JSON")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        if name == "check":
            p.add_argument("--field", help="field directory written by solve")
            p.add_argument("--kinds", default="all", help=f"comma list from {','.join(KINDS)} or 'all'")
        if name in ("check", "converge"):
            p.add_argument("--grids", help="h1:dt1,h2:dt2,...")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoOracleError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NO_ORACLE
    except (HypothesisError, CoercivityError, DomainError) as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (ProblemError, ConfigError, InputError, ExpressionError, GraphError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RadiusError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
