"""Command-line interface: ``parabolic-mp <command> [options]``.

Reports go to the directory given by ``--outdir``, else the environment
variable ``PARABOLIC_MP_OUTDIR``, else ``./parabolic_mp_out``.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import barrier as bar
from . import io
from .estimates import bony_check, ratio_scan, singular_drift_counterexample, verify_bound
from .families import FAMILIES, build_family
from .forcing import FORCINGS, build_forcing
from .grid import GridFunction, build_cylinder
from .mixed_norm import MixedNormSpec, mixed_norm
from .operator import ExponentPair, drift_weight
from .scenario import OUTDIR_ENV, ScenarioError, bundled_scenarios, execute, load_scenario, write_reports
from .solver import SchemeConfig, SolverError, solve_barrier_problem, solve_forward

log = logging.getLogger("parabolic_mp")


def _kv(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {item!r}")
        out[key] = _num(val)
    return out


def _num(text):
    for conv in (int, float):
        try:
            v = conv(text)
            return text if isinstance(v, float) and math.isinf(v) else v
        except ValueError:
            pass
    return text


def _outdir(args) -> Path:
    out = Path(args.outdir or os.environ.get(OUTDIR_ENV, "parabolic_mp_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pair(text: str, n: int) -> ExponentPair:
    p, _, q = text.partition(",")
    sub = lambda s: str(n) if s.strip() == "n" else s.strip()  # noqa: E731
    return ExponentPair(sub(p), sub(q))


def _add_problem(sp, forcing=True):
    sp.add_argument("--family", default="heat", choices=sorted(FAMILIES))
    sp.add_argument("--param", action="append", metavar="KEY=VALUE", help="family parameter (repeatable)")
    sp.add_argument("-n", "--dim", type=int, default=1, choices=(1, 2))
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--Nx", type=int, default=41)
    sp.add_argument("--Nt", type=int, default=41)
    sp.add_argument("--theta", type=float, default=1.0)
    sp.add_argument("--drift-scheme", default="upwind", choices=("upwind", "central"))
    sp.add_argument("--mixed-scheme", default="seven_point", choices=("seven_point", "cross"))
    sp.add_argument("--linear-solver", default="banded_direct", choices=("banded_direct", "iterative"))
    if forcing:
        sp.add_argument("--forcing", default="constant", choices=sorted(FORCINGS))
        sp.add_argument("--forcing-param", action="append", metavar="KEY=VALUE")


def _problem(args):
    g = build_cylinder(args.dim, args.R, args.T, args.Nx, args.Nt)
    L = build_family(args.family, g, **_kv(args.param))
    f = build_forcing(args.forcing, g, **_kv(args.forcing_param)) if hasattr(args, "forcing") else None
    cfg = SchemeConfig(theta=args.theta, drift_scheme=args.drift_scheme, mixed_scheme=args.mixed_scheme,
                       linear_solver=args.linear_solver)
    return g, L, f, cfg


def _nodal_csv(path, columns: dict, g):
    """Nodewise diagnostics with coordinates."""
    xs = [np.broadcast_to(c, g.shape).ravel() for c in g.spatial_coords()]
    t = np.broadcast_to(g.time_coords(), g.shape).ravel()
    rows = []
    for i in range(t.size):
        row = {"node": i, "t": float(t[i])}
        row.update({f"x{k + 1}": float(x[i]) for k, x in enumerate(xs)})
        row.update({k: float(np.asarray(v).ravel()[i]) for k, v in columns.items()})
        rows.append(row)
    io.write_summary_csv(rows, path)


# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    g, L, f, cfg = _problem(args)
    u, info = solve_forward(L, f, cfg, return_info=True)
    out = _outdir(args)
    io.write_grid(g, out / "grid.json")
    io.write_grid_function(u, out / "solution.csv")
    io.write_json({"kind": "solve", "family": L.name, "grid": g.to_record(), "scheme": cfg.__dict__,
                   "u_sup": float(u.filled().max()), **info.to_dict()}, out / "solve.json")
    print(f"sup u = {float(u.filled().max()):.12g}  residual = {info.residual:.3e}  monotone = {info.monotone}")
    return 0


def cmd_norm(args) -> int:
    u = io.read_grid_function(args.input)
    weight = io.read_grid_function(args.weight, u.grid) if args.weight else None
    restriction = io.read_grid_function(args.restriction, u.grid).filled() > 0.5 if args.restriction else None
    spec = MixedNormSpec(ExponentPair(args.p, args.q), args.order, weight, restriction)
    val = mixed_norm(u, spec)
    print(repr(val) if math.isfinite(val) else "inf")
    out = _outdir(args)
    io.write_json({"kind": "norm", "input": str(args.input), "p": str(spec.exponents.p), "q": str(spec.exponents.q),
                   "order": spec.resolved_order(), "weighted": weight is not None,
                   "restricted": restriction is not None, "value": val, "grid": u.grid.to_record()},
                  out / (args.name or "norm.json"))
    return 0


def cmd_verify_bound(args) -> int:
    g, L, f, cfg = _problem(args)
    e0 = _pair(args.exponents, g.n)
    e1 = [_pair(s, g.n) for s in args.drift_exponents or ()]
    rep = verify_bound(L, f, e0, e1, cfg)
    out = _outdir(args)
    io.write_json(rep.to_dict(), out / "verify_bound.json")
    if args.nodal_csv:
        u = solve_forward(L, f, cfg)
        _nodal_csv(out / "verify_bound_nodes.csv", {"u": u.filled()}, g)
    print(f"sup u = {rep.lhs_sup:.6g}  rhs = {rep.rhs_norm:.6g}  ratio = {rep.ratio:.6g}  "
          f"hypotheses {'ok' if rep.hypotheses_ok else 'violated'}")
    return 0 if (not rep.hypotheses_ok or math.isfinite(rep.ratio)) else 1


def cmd_bony(args) -> int:
    g, L, f, cfg = _problem(args)
    u = solve_forward(L, f, cfg)
    res = bony_check(L, u, args.tol, cfg.drift_scheme, cfg.mixed_scheme)
    out = _outdir(args)
    io.write_json(res.to_dict(), out / "bony_check.json")
    if args.nodal_csv:
        _nodal_csv(out / "bony_nodes.csv", {"u": u.filled()}, g)
    print(f"verdict = {res.verdict}")
    return 1 if res.verdict == "fail" else 0


def cmd_counterexample(args) -> int:
    reps = [singular_drift_counterexample(args.alpha, n, args.Nx, args.Nt, tuple(args.study_Nx)) for n in args.dims]
    out = _outdir(args)
    io.write_json({"kind": "counterexample", "runs": [r.to_dict() for r in reps]}, out / "counterexample.json")
    ok = True
    for r in reps:
        print(f"n = {r.n}: U(0,1) = {r.U_at_0_1}  max LU (outside ball) = {r.LU_max_outside_ball:.4f}  "
              f"boundary max = {r.boundary_max:.3g}  ||h|| = {', '.join(f'{v:.4g}' for v in r.h_norms)}  "
              f"{'divergent' if r.divergent else 'finite'}")
        ok &= r.reproduced
    return 0 if ok else 1


def cmd_barrier(args) -> int:
    g = build_cylinder(args.dim, args.R, args.T, args.Nx, args.Nt)
    params = _kv(args.param)
    family = args.family or ("composite" if args.parts else "singular_drift")
    if family == "singular_drift":
        params.setdefault("alpha", args.alpha)
    if args.parts:
        if family != "composite":
            raise ValueError("--parts needs the composite family")
        params["parts"] = args.parts
    L = build_family(family, g, **params)
    cfg = SchemeConfig(drift_scheme=args.drift_scheme)
    out = _outdir(args)
    eps = 0.1 * g.R if args.eps is None else args.eps
    report = {"kind": "barrier", "family": L.name, "grid": g.to_record(), "eps": eps}
    ok = True
    first = L.part_exponents[0] if L.part_exponents else None
    e1 = first or _pair(args.exponents, g.n)
    h = drift_weight(L, e1, 0 if first is not None else "total")
    r, fr = bar.radial_majorant(h, g.R + eps, args.margin)
    B1 = bar.solve_radial_monge_ampere((r, fr), g.n, g.R + eps, args.steps)
    io.write_summary_csv([{"r": float(a), "v": float(b), "dv": float(c), "f": float(d)}
                          for a, b, c, d in zip(B1.r, B1.v, B1.dv, B1.f)], out / "radial_profile.csv")
    report["radial"] = {"exponents": str(e1), "norm": B1.norm, "slope_max": B1.slope_max}
    if len(L.b_parts) > 1:
        tail = L.full(sum(L.b_norm(k) for k in range(1, len(L.b_parts))))
        B = bar.compose_barriers(B1, solve_barrier_problem(L, tail, cfg))
        report["construction"] = "composite"
    else:
        B = solve_barrier_problem(L, L.b_norm(), cfg)
        report["construction"] = "pde"
    v = bar.verify_barrier_inequality(L, B, "abs_b", args.tol, cfg.drift_scheme, cfg.mixed_scheme)
    report["verdict"] = v.to_dict()
    ok &= v.passed
    io.write_json(report, out / "barrier.json")
    print(f"{report['construction']} barrier: {'pass' if v.passed else 'fail'} (min slack {v.min_slack:.3e}, tol {v.tol:.3e})")
    return 0 if ok else 1


def cmd_scan(args) -> int:
    params = _kv(args.param)
    fparams = _kv(args.forcing_param)
    e0 = _pair(args.exponents, args.dim)
    cfg = SchemeConfig(theta=args.theta, drift_scheme=args.drift_scheme, mixed_scheme=args.mixed_scheme,
                       linear_solver=args.linear_solver)
    reps = ratio_scan(lambda g: build_family(args.family, g, **params),
                      lambda g: build_forcing(args.forcing, g, **fparams),
                      e0, args.Nx_list, args.dim, args.R, args.T, cfg=cfg)
    out = _outdir(args)
    io.write_json({"kind": "scan", "Nx": args.Nx_list, "reports": [r.to_dict() for r in reps]}, out / "scan.json")
    io.write_summary_csv([{"Nx": N, "lhs_sup": r.lhs_sup, "rhs_norm": r.rhs_norm, "ratio": r.ratio}
                         for N, r in zip(args.Nx_list, reps)], out / "scan.csv")
    for N, r in zip(args.Nx_list, reps):
        print(f"Nx = {N:4d}  ratio = {r.ratio:.6g}")
    return 0


def _run_one(path: str, outdir: str | None):
    s = load_scenario(path, outdir)
    res = execute(s)
    write_reports(res)
    return s.name, res.ok, res.summary_row()


def cmd_run(args) -> int:
    bundled = bundled_scenarios()
    if args.list:
        for name, p in bundled.items():
            print(name)
        return 0
    paths = [str(bundled.get(s, s)) for s in args.scenarios]
    if not paths:
        print("no scenarios given (use --list to see the bundled ones)", file=sys.stderr)
        return 2
    # validate everything before any work starts
    try:
        for p in paths:
            load_scenario(p, args.outdir)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_one, paths, [args.outdir] * len(paths)))
    else:
        results = [_run_one(p, args.outdir) for p in paths]
    rows = [row for _, _, row in results]
    if len(rows) > 1:
        base = Path(args.outdir or os.environ.get(OUTDIR_ENV, "parabolic_mp_out"))
        io.write_summary_csv(rows, base / "batch_summary.csv")
    for name, ok, row in results:
        checks = ", ".join(f"{k}={v}" for k, v in row.items() if k not in ("scenario", "ok"))
        print(f"{name}: {'ok' if ok else 'FAILED'}  ({checks})")
    return 0 if all(ok for _, ok, _ in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parabolic-mp", description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default=None, help=f"report directory (default ${OUTDIR_ENV} or ./parabolic_mp_out)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve L u = f with zero parabolic data")
    _add_problem(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("norm", help="mixed norm of a grid-function CSV")
    sp.add_argument("input")
    sp.add_argument("-p", required=True)
    sp.add_argument("-q", required=True)
    sp.add_argument("--order", default="auto", choices=("auto", "space_outer", "time_outer"))
    sp.add_argument("--weight", help="grid-function CSV of positive weights")
    sp.add_argument("--restriction", help="grid-function CSV, nonzero marks the restriction set")
    sp.add_argument("--name", help="JSON file name (default norm.json)")
    sp.set_defaults(func=cmd_norm)

    sp = sub.add_parser("verify-bound", help="compare sup u with the weighted right-hand side")
    _add_problem(sp)
    sp.add_argument("--exponents", default="n,inf", help="p0,q0 (literal n allowed)")
    sp.add_argument("--drift-exponents", action="append", help="p,q for a drift norm over Q_u (repeatable)")
    sp.add_argument("--nodal-csv", action="store_true")
    sp.set_defaults(func=cmd_verify_bound)

    sp = sub.add_parser("bony-check", help="normalized Lu at an interior nonnegative maximum")
    _add_problem(sp)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--nodal-csv", action="store_true")
    sp.set_defaults(func=cmd_bony)

    sp = sub.add_parser("counterexample", help="singular drift comparison function")
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.add_argument("--dims", type=int, nargs="+", default=[1, 2])
    sp.add_argument("--Nx", type=int, default=81)
    sp.add_argument("--Nt", type=int, default=81)
    sp.add_argument("--study-Nx", type=int, nargs="+", default=[41, 81, 161, 321])
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("barrier", help="construct and verify a drift barrier")
    sp.add_argument("--family", choices=sorted(FAMILIES),
                    help="default: composite when --parts is given, singular_drift otherwise")
    sp.add_argument("--param", action="append", metavar="KEY=VALUE")
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--parts", help="composite drift parts, e.g. 'singular:alpha=1,p=n,q=inf; constant:value=1,p=inf,q=inf'")
    sp.add_argument("--exponents", default="n,inf", help="exponent pair of the radial part when no parts are given")
    sp.add_argument("-n", "--dim", type=int, default=2, choices=(1, 2))
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--Nx", type=int, default=41)
    sp.add_argument("--Nt", type=int, default=21)
    sp.add_argument("--eps", type=float, default=None, help="radial extension (default 0.1 R)")
    sp.add_argument("--margin", type=float, default=0.01)
    sp.add_argument("--steps", type=int, default=1000)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--drift-scheme", default="upwind", choices=("upwind", "central"))
    sp.set_defaults(func=cmd_barrier)

    sp = sub.add_parser("scan", help="bound ratio across grid refinements")
    _add_problem(sp)
    sp.add_argument("--exponents", default="n,inf")
    sp.add_argument("--Nx-list", type=int, nargs="+", default=[41, 81, 161])
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("run", help="run scenario files or bundled scenario names")
    sp.add_argument("scenarios", nargs="*")
    sp.add_argument("--list", action="store_true", help="list bundled scenarios")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, SolverError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
