"""Command-line entry point: ``hbadapt {solve,estimate,adapt,convergence,mesh-info}``.

Exit status is 0 on success, 2 on usage errors and 1 on numerical failures.
Outputs go to ``--out``, else ``$HBADAPT_OUT``, else ``./hbadapt-out``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from hbadapt import estimator as est
from hbadapt import metric as met
from hbadapt.adapt import HESSIAN_SOURCES, AdaptConfig, adaptive_loop
from hbadapt.errors import ConfigurationError, HbAdaptError, MeshParseError
from hbadapt.fem import l2_error, solve
from hbadapt.fields import write_field
from hbadapt.mesh import read_mesh, write_mesh
from hbadapt.problems import PROBLEMS, problem_library

OUT_ENV = "HBADAPT_OUT"
log = logging.getLogger("hbadapt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _targets(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hbadapt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--problem", choices=PROBLEMS, default="tanh")
    common.add_argument("--seed-mesh", type=Path, help="initial mesh file instead of the built-in grid")
    common.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./hbadapt-out)")
    common.add_argument("--threads", type=_positive_int, default=1,
                        help="worker cap; all stages are currently sequential")
    common.add_argument("--gs-rtol", type=float, default=est.DEFAULT_GS_RTOL)
    common.add_argument("--gs-max-sweeps", type=_positive_int, default=est.DEFAULT_GS_MAX_SWEEPS)

    loop = _Parser(add_help=False)
    loop.add_argument("--estimator", choices=est.SOLVERS, default="full-gs")
    loop.add_argument("--hessian", choices=HESSIAN_SOURCES, default="estimator",
                      help="Hessian source; 'estimator' uses the bubble estimate")
    loop.add_argument("--eps-mesh", type=float, default=0.1)
    loop.add_argument("--q", type=float, default=2.0)
    loop.add_argument("--max-iter", type=int, default=25)

    sub.add_parser("solve", parents=[common], help="one finite element solve and its error")
    sub.add_parser("estimate", parents=[common], help="compare the four estimator solvers on one solve")
    p = sub.add_parser("adapt", parents=[common, loop], help="run the adaptive loop")
    p.add_argument("--n-target", type=float, default=600.0)
    p = sub.add_parser("convergence", parents=[common, loop], help="adaptive runs over several targets")
    p.add_argument("--n-target", type=_targets, default=[300.0, 600.0, 1200.0, 2400.0],
                   help="comma-separated list, e.g. 300,600,1200")
    p = sub.add_parser("mesh-info", help="quality of a mesh against a vertex metric file")
    p.add_argument("mesh", type=Path)
    p.add_argument("metric", type=Path, nargs="?", help="vertex metric file (identity if omitted)")
    p.add_argument("--q", type=float, default=2.0)
    return parser


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, "hbadapt-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _setup(args):
    problem, mesh = problem_library(args.problem)
    if args.seed_mesh is not None:
        mesh = read_mesh(args.seed_mesh)
    problem.check(mesh)
    return problem, mesh


def _config(args, n_target) -> AdaptConfig:
    return AdaptConfig(estimator=args.estimator, hessian=args.hessian, n_target=n_target, gs_rtol=args.gs_rtol,
                       gs_max_sweeps=args.gs_max_sweeps, eps_mesh=args.eps_mesh, max_iter=args.max_iter, q=args.q,
                       out=args.out)


def cmd_solve(args) -> int:
    problem, mesh = _setup(args)
    u_h = solve(problem, mesh)
    out = _out_dir(args)
    write_mesh(mesh, out / "mesh.mesh")
    write_field(out / "solution.txt", u_h)
    print(f"problem {problem.name}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    if problem.exact is not None:
        print(f"L2 error {l2_error(u_h, problem.exact, mesh):.6e}")
    else:
        print("no exact solution; L2 error not available")
    return 0


def cmd_estimate(args) -> int:
    problem, mesh = _setup(args)
    u_h = solve(problem, mesh)
    ep = est.assemble_error_problem(problem, mesh, u_h)
    err = l2_error(u_h, problem.exact, mesh) if problem.exact is not None else math.nan
    print(f"problem {problem.name}: {mesh.n_triangles} triangles, L2 error {err:.6e}")
    print(f"{'estimator':<12}{'estimate':>14}{'effectivity':>14}{'beta':>10}{'sweeps':>8}{'time [s]':>10}")
    out = _out_dir(args)
    for method in est.SOLVERS:
        t0 = time.perf_counter()
        sweeps = 0
        if method == "edge":
            z = est.solve_edge_based(ep)
        elif method == "node":
            z = est.solve_node_based(ep, mesh)
        elif method == "full-gs":
            z, sweeps = est.solve_full_gs(ep, args.gs_rtol, args.gs_max_sweeps)
        else:
            z = est.solve_full_exact(ep)
        dt = time.perf_counter() - t0
        eff, beta = (est.effectivity(z, u_h, problem.exact, mesh) if problem.exact is not None
                     else (math.nan, math.nan))
        print(f"{method:<12}{est.estimate_l2(z, mesh):>14.6e}{eff:>14.4f}{beta:>10.4f}{sweeps:>8d}{dt:>10.3f}")
        write_field(out / f"bubbles-{method}.txt", z)
    return 0


def cmd_adapt(args) -> int:
    problem, mesh = _setup(args)
    result = adaptive_loop(problem, mesh, _config(args, args.n_target))
    out = _out_dir(args)
    result.history.write_csv(out / "history.csv")
    write_mesh(result.mesh, out / "final.mesh")
    write_field(out / "solution.txt", result.u_h)
    if result.metric is not None:
        met.write_vertex_metric(out / "final.metric", result.metric)
    f = result.history.final
    print(f"problem {problem.name}: {len(result.history.records) - 1} remeshes, {f.n_vertices} vertices, "
          f"{f.n_triangles} triangles, L2 error {f.l2_error:.6e}, estimate {f.estimate_l2:.6e}, Q_mesh {f.q_mesh:.4f}")
    print(f"wrote {out}")
    return 0


def cmd_convergence(args) -> int:
    problem, mesh = _setup(args)
    out = _out_dir(args)
    rows = []
    for n in args.n_target:
        result = adaptive_loop(problem, mesh, _config(args, n))
        f = result.history.final
        rows.append((n, f.n_vertices, f.n_triangles, f.l2_error, f.estimate_l2, len(result.history.records) - 1))
        print(f"N {n:g}: {f.n_triangles} triangles, L2 error {f.l2_error:.6e}, estimate {f.estimate_l2:.6e}")
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_target", "n_vertices", "n_triangles", "l2_error", "estimate_l2", "iterations"])
        for n, nv, nt, e, s, it in rows:
            w.writerow([f"{n:.17g}", nv, nt, f"{e:.17g}", f"{s:.17g}", it])
    print(f"wrote {out / 'convergence.csv'}")
    return 0


def cmd_mesh_info(args) -> int:
    mesh = read_mesh(args.mesh)
    vm = met.read_vertex_metric(args.metric) if args.metric else np.tile([1.0, 0.0, 1.0], (mesh.n_vertices, 1))
    if len(vm) != mesh.n_vertices:
        raise ConfigurationError(f"metric has {len(vm)} tensors but the mesh has {mesh.n_vertices} vertices")
    report = met.quality(mesh, met.vertex_to_element_metric(vm, mesh), q=args.q)
    print(f"vertices {mesh.n_vertices}, triangles {mesh.n_triangles}, area {mesh.domain_area:.6g}")
    print(f"Q_mesh {report.q_mesh:.6f}")
    print(f"Q_ali mean {report.q_ali.mean():.6f} max {report.q_ali.max():.6f}")
    print(f"Q_eq min {report.q_eq.min():.6f} max {report.q_eq.max():.6f}")
    print(f"metric volume {report.sigma:.6g}, max aspect ratio {report.max_aspect_ratio:.6g}")
    return 0


COMMANDS = {"solve": cmd_solve, "estimate": cmd_estimate, "adapt": cmd_adapt,
            "convergence": cmd_convergence, "mesh-info": cmd_mesh_info}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, MeshParseError) as exc:
        print(f"hbadapt: error: {exc}", file=sys.stderr)
        return 2
    except (HbAdaptError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"hbadapt: numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"hbadapt: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
