"""Command-line front end.

Letters are 0-based.  On paths that the theorem checks extend with a
tracking component, letter 0 is that component and letters 1..d are the
original coordinates.  Exit status: 0 when every reported residual is within
tolerance, 1 on a tolerance breach, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fixtures
from .functionals import builtin, parse_tensor_spec
from .integration import MeshSchedule, functional_integrand, functional_pair, rough_integral, young_integral
from .paths import GroupPath
from .signature import signature
from .tensor_algebra import format_word
from .verify import (
    check_foellmer_ito,
    check_ito_rough,
    check_ito_young,
    check_rie,
    extended,
    foellmer_qv,
    taylor_expand,
    uat_fit,
)


class InputError(Exception):
    pass


def load_path(spec: str | None) -> GroupPath:
    if spec is None:
        return fixtures.two_segment()
    if spec in fixtures.NAMED:
        return fixtures.NAMED[spec]()
    p = Path(spec)
    if not p.exists():
        raise InputError(f"no such path file or fixture: {spec}")
    try:
        return GroupPath.from_json(json.loads(p.read_text()))
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read path {spec}: {exc}") from exc


def make_functional(args):
    params = {}
    if args.u is not None:
        params["u"] = args.u
    if args.f is not None:
        params["f"] = args.f
    if args.letters is not None:
        a, b = (int(x) for x in args.letters.split(","))
        params["a"], params["b"] = a, b
    try:
        if args.u is not None:
            parse_tensor_spec(args.u)
        return builtin(args.functional, **params)
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from exc


def schedule_from(args) -> MeshSchedule:
    return MeshSchedule(h0=args.h0, levels=args.levels)


def write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def report(obj: dict, target: str | None):
    if target:
        Path(target).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _times(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise InputError(f"bad time list {text!r}") from exc


# ------------------------------------------------------------------ commands


def cmd_sig(args) -> int:
    X = load_path(args.path)
    N = args.N if args.N is not None else X.level + 2
    if N <= X.level:
        raise InputError("signature level must exceed the path level")
    write(signature(X, N).to_csv(_times(args.t)), args.out)
    return 0


def cmd_integrate(args) -> int:
    X = extended(load_path(args.path))
    F = make_functional(args)
    if args.kind == "young":
        res = young_integral(functional_integrand(F, X, 1), X, args.t, schedule_from(args), tol=args.tol)
    else:
        res = rough_integral(functional_pair(F, X.lift(2)), X.lift(2), args.t, schedule_from(args), tol=args.tol)
    write(res.table(), args.out)
    report({"value": float(np.ravel(res.value)[0]), "rate": res.rate, "converged": res.converged,
            "error_estimate": res.error_estimate}, args.report)
    return 0 if res.converged else 1


def cmd_derive(args) -> int:
    X = load_path(args.path)
    if args.extend:
        X = extended(X)
    F = make_functional(args)
    rows = ["t,word,value\n"]
    for t in _times(args.t):
        D = np.asarray(F.derivative(args.k, t, X))
        for idx in np.ndindex(*D.shape):
            rows.append(f"{float(t)!r},\"{format_word(idx)}\",{float(D[idx])!r}\n")
    write("".join(rows), args.out)
    return 0


def cmd_ito(args) -> int:
    X = load_path(args.path)
    F = make_functional(args)
    sch = schedule_from(args)
    if args.level == 1:
        rep = check_ito_young(F, X, args.t, sch, tol=args.tol)
    else:
        rep = check_ito_rough(F, X, args.t, sch, tol=args.tol)
    write(rep.table(), args.out)
    report(rep.to_json(), args.report)
    print(f"residual {rep.residual!r} tol {args.tol!r} {'PASS' if rep.passed else 'FAIL'}", file=sys.stderr)
    return 0 if rep.passed else 1


def cmd_taylor(args) -> int:
    X = load_path(args.path)
    F = make_functional(args)
    try:
        rep = taylor_expand(F, X, args.t, args.K, args.level, schedule_from(args), tol=args.tol)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    write(rep.table(), args.out)
    report(rep.to_json(), args.report)
    print(f"remainder {rep.remainder_value!r} residual {rep.residual!r} {'PASS' if rep.passed else 'FAIL'}",
          file=sys.stderr)
    return 0 if rep.passed else 1


def cmd_qv(args) -> int:
    X = load_path(args.path)
    levels = min(args.levels, args.depth + 1)
    rep = foellmer_qv(X, args.t, MeshSchedule(levels=levels, kind="dyadic", depth0=args.depth - levels + 1))
    write(rep.table(), args.out)
    report(rep.to_json(), args.report)
    if args.functional:
        F = make_functional(args)
        try:
            ito = check_foellmer_ito(F, X, args.t, tol=args.tol)
        except ValueError as exc:
            print(f"refused: {exc}", file=sys.stderr)
            return 1
        print(f"foellmer residual {ito.residual!r} {'PASS' if ito.passed else 'FAIL'}", file=sys.stderr)
        return 0 if ito.passed and rep.converged else 1
    return 0 if rep.converged else 1


def cmd_rie(args) -> int:
    X = load_path(args.path)
    rep = check_rie(X, args.p, args.t, tol=args.tol)
    write(rep.table(), args.out)
    report(rep.to_json(), args.report)
    print(f"failing clauses: {rep.failing or 'none'}; lift gap {rep.lift_gap!r}; bracket gap {rep.bracket_gap!r}",
          file=sys.stderr)
    return 0 if rep.passed else 1


def cmd_uat(args) -> int:
    X = load_path(args.path)
    F = make_functional(args)
    rows = ["N,sup_error_F,sup_error_DF\n"]
    reps = []
    for N in (int(x) for x in args.N.split(",")):
        r = uat_fit(F, X, N, np.linspace(0.0, 1.0, args.grid), derivative_weight=args.derivative_weight)
        reps.append(r.to_json())
        rows.append(f"{N},{r.sup_errors[0]!r},{r.sup_errors[1]!r}\n")
    write("".join(rows), args.out)
    report({"fits": reps}, args.report)
    errs = [r["sup_errors"][0] for r in reps]
    ok = all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(errs[:-1], errs[1:]))
    return 0 if ok else 1


def cmd_fixtures(args) -> int:
    for name in fixtures.write_all(args.out_dir):
        print(name)
    return 0


# ------------------------------------------------------------------ parser


def _functional_args(p, default="linear-sig"):
    p.add_argument("--functional", default=default, help="builtin name (linear-sig, levy-area, compose, ...)")
    p.add_argument("--u", help='tensor spec such as "2*(1,2) - 0.5*(0)"')
    p.add_argument("--f", help="scalar function for compose: sin, cos, exp, square, poly:c0,c1,...")
    p.add_argument("--letters", help="two letters a,b for levy-area")


def _mesh_args(p):
    p.add_argument("--h0", type=float, default=2.0**-4, help="coarsest cell length")
    p.add_argument("--levels", type=int, default=12, help="number of halvings + 1")
    p.add_argument("--tol", type=float, default=1e-6)


def _io_args(p):
    p.add_argument("--out", help="write the CSV table here instead of stdout")
    p.add_argument("--report", help="write a JSON report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cadlag-rough", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sig", help="signature coefficients as CSV")
    p.add_argument("--path")
    p.add_argument("--N", type=int)
    p.add_argument("--t", default="1.0", help="comma-separated times")
    _io_args(p)
    p.set_defaults(func=cmd_sig)

    p = sub.add_parser("integrate", help="Young or rough integral of DF with a convergence table")
    p.add_argument("--path")
    p.add_argument("--kind", choices=["young", "rough"], default="young")
    p.add_argument("--t", type=float, default=1.0)
    _functional_args(p)
    _mesh_args(p)
    _io_args(p)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("derive", help="vertical derivatives")
    p.add_argument("--path")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--t", default="1.0")
    p.add_argument("--extend", action="store_true", help="add the tracking component first")
    _functional_args(p)
    _io_args(p)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("ito", help="functional Ito formula check")
    p.add_argument("--path")
    p.add_argument("--level", type=int, choices=[1, 2], default=1)
    p.add_argument("--t", type=float, default=1.0)
    _functional_args(p)
    _mesh_args(p)
    _io_args(p)
    p.set_defaults(func=cmd_ito)

    p = sub.add_parser("taylor", help="signature Taylor expansion")
    p.add_argument("--path")
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--level", type=int, choices=[1, 2])
    p.add_argument("--t", type=float, default=1.0)
    _functional_args(p)
    _mesh_args(p)
    _io_args(p)
    p.set_defaults(func=cmd_taylor)

    p = sub.add_parser("qv", help="Foellmer quadratic variation (and Ito check with --functional)")
    p.add_argument("--path")
    p.add_argument("--depth", type=int, default=14)
    p.add_argument("--levels", type=int, default=11)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-5)
    _functional_args(p, default=None)
    _io_args(p)
    p.set_defaults(func=cmd_qv)

    p = sub.add_parser("rie", help="(RIE) property check")
    p.add_argument("--path")
    p.add_argument("--p", type=float, default=2.5)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-5)
    _io_args(p)
    p.set_defaults(func=cmd_rie)

    p = sub.add_parser("uat", help="linear signature regression of a functional")
    p.add_argument("--path")
    p.add_argument("--N", default="2,4,6")
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--derivative-weight", type=float, default=0.1)
    _functional_args(p, default="sin-time")
    _io_args(p)
    p.set_defaults(func=cmd_uat)

    p = sub.add_parser("fixtures", help="regenerate the golden path files")
    p.add_argument("--out-dir", default="fixtures")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except InputError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
