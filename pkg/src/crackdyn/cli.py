"""Command-line entry point: simulate, fixedpoint, contraction,
converge, korn, validate.

Every command reads one scenario document, writes delimited tables, a
gnuplot-dialect plot script, rendered PNG figures, and a JSON manifest
into the output directory.  Exit codes: 0 success, 2 configuration
error, 3 solver failure, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import convergence as convergence_mod
from . import elastodynamics as dyn
from . import geometry, reporting, viscoelastic
from .assembly import SolverError
from .config import parse_scenario
from .scenario import Workspace, validate_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4


class _CliFailure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="crackdyn",
        description="Cracked viscoelastodynamics: simulation and "
                    "experiment harness.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="scenario document path")
    common.add_argument("--out", default="out",
                        help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    common.add_argument("--threads", type=int, default=1,
                        help="accepted for compatibility; runs are "
                             "single-threaded regardless")
    common.add_argument("--strict-h15", action="store_true",
                        help="treat a crack-speed bound violation as an "
                             "error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="monolithic viscoelastic run with energy audit")
    p.add_argument("--dt", type=float, default=None,
                   help="override the time step")
    p.add_argument("--dump-memory", action="store_true",
                   help="also write the memory-field norm time series")

    p = sub.add_parser("fixedpoint", parents=[common],
                       help="iterated solution-map run with interval report")
    p.add_argument("--k", type=int, default=None,
                   help="pin the subinterval count")
    p.add_argument("--tol", type=float, default=None,
                   help="override the iteration tolerance")

    p = sub.add_parser("contraction", parents=[common],
                       help="measure the solution-map contraction factor")
    p.add_argument("--horizons", default=None,
                   help="comma-separated horizons (default from config)")

    p = sub.add_parser("converge", parents=[common],
                       help="continuous-dependence sequence experiment")
    p.add_argument("--n", default=None,
                   help="comma-separated sequence indices "
                        "(default from config)")

    p = sub.add_parser("korn", parents=[common],
                       help="Korn constant estimates under refinement")
    p.add_argument("--levels", type=int, default=3,
                   help="number of refinement levels (default 3)")

    sub.add_parser("validate", parents=[common],
                   help="run all scenario validators and report")
    return parser


def _load_config(args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _CliFailure(EXIT_CONFIG, f"cannot read config: {exc}")
    name = os.path.splitext(os.path.basename(args.config))[0]
    config, issues = parse_scenario(text, name=name)
    if issues:
        lines = "\n".join(str(issue) for issue in issues)
        raise _CliFailure(EXIT_CONFIG, f"configuration errors:\n{lines}")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.strict_h15:
        changes["h15_policy"] = "strict"
    if getattr(args, "dt", None) is not None:
        changes["dt"] = args.dt
    if getattr(args, "k", None) is not None:
        changes["subintervals"] = args.k
    if getattr(args, "tol", None) is not None:
        changes["picard_tol"] = args.tol
    if getattr(args, "horizons", None):
        changes["horizons"] = tuple(
            float(v) for v in args.horizons.split(","))
    if getattr(args, "n", None):
        changes["sequence_n"] = tuple(int(v) for v in args.n.split(","))
    if changes:
        config = config.with_changes(**changes)
    return config, text


def _validate(config, full):
    """Run validators; print issues; fail on errors.

    full=True includes the motion/speed/Korn checks; otherwise they run
    only under the strict policy (where a violation must stop the run).
    """
    report = validate_scenario(
        config, check_speed=full or config.h15_policy == "strict")
    for issue in report.issues:
        stream = sys.stderr if issue.level == "error" else sys.stdout
        print(f"{issue.level}: [{issue.code}] {issue.message}", file=stream)
    if not report.ok:
        raise _CliFailure(EXIT_INVARIANT, "scenario validation failed")
    return report


def _node_norms(workspace, traj):
    rows = []
    vol = traj.spaces[0].mesh.cell_volumes
    for k in range(traj.n_nodes):
        sp = traj.spaces[k]
        M = workspace.mass(sp)
        g = traj.grads[k]
        rows.append((
            float(np.sqrt(traj.u[k] @ (M @ traj.u[k]))),
            float(np.sqrt(np.einsum("n,nij,nij->", vol, g, g))),
            float(np.sqrt(traj.v[k] @ (M @ traj.v[k]))),
        ))
    return rows


def _finish(out_dir, manifest, csv_paths):
    plottable = [p for p in csv_paths
                 if reporting.has_plot_recipe(reporting.read_csv(p)[0])]
    if plottable:
        script = reporting.write_plot_script(out_dir, plottable)
        manifest.add_file(script)
        for path in plottable:
            manifest.add_file(reporting.render_figure(path))
    for path in csv_paths:
        manifest.add_file(path)
    path = manifest.write(out_dir)
    print(f"wrote {len(manifest.files)} files to {out_dir} "
          f"(manifest {os.path.basename(path)})")


def _energy_csv(out_dir, workspace, config, traj):
    tensor = config.operative_tensor()
    F_table = viscoelastic.matrix_load_table(traj, config)
    audit = dyn.energy_audit(traj, workspace, tensor,
                             f_exprs=config.f_exprs, F_table=F_table)
    norms = _node_norms(workspace, traj)
    rows = [(audit.times[k], audit.kinetic[k], audit.elastic[k],
             audit.work[k], audit.slack[k]) + norms[k]
            for k in range(traj.n_nodes)]
    path = reporting.write_csv(
        os.path.join(out_dir, "energy.csv"),
        ["t", "kinetic", "elastic", "work", "slack",
         "norm_u", "norm_Du", "norm_v"], rows)
    return path, audit


def _cmd_simulate(args):
    config, text = _load_config(args)
    _validate(config, full=False)
    ws = Workspace(config)
    watch = reporting.Stopwatch()
    try:
        traj = viscoelastic.solve_monolithic(ws, config)
    except SolverError as exc:
        raise _CliFailure(EXIT_SOLVER, f"solver failure: {exc}")
    os.makedirs(args.out, exist_ok=True)
    csv_paths = []
    energy_path, audit = _energy_csv(args.out, ws, config, traj)
    csv_paths.append(energy_path)
    if args.dump_memory and traj.memory_values is not None:
        vol = ws.mesh.cell_volumes
        rows = [(traj.times[k],
                 float(np.sqrt(np.einsum("n,nij,nij->", vol,
                                         traj.memory_values[k],
                                         traj.memory_values[k]))))
                for k in range(traj.n_nodes)]
        csv_paths.append(reporting.write_csv(
            os.path.join(args.out, "memory.csv"),
            ["t", "norm_memory"], rows))
    manifest = reporting.RunManifest(command="simulate", config_text=text,
                                     seed=config.seed,
                                     threads=args.threads)
    manifest.wall_seconds = watch.elapsed()
    _finish(args.out, manifest, csv_paths)
    if not audit.ok:
        print(f"energy slack {np.max(audit.slack):.3e} exceeds "
              f"tolerance {audit.tol_energy:.3e}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_fixedpoint(args):
    config, text = _load_config(args)
    _validate(config, full=False)
    ws = Workspace(config)
    watch = reporting.Stopwatch()
    try:
        result = viscoelastic.solve_fixedpoint(ws, config)
    except (SolverError, viscoelastic.ContractionError) as exc:
        raise _CliFailure(EXIT_SOLVER, f"solver failure: {exc}")
    traj = result.trajectory
    os.makedirs(args.out, exist_ok=True)
    norms = _node_norms(ws, traj)
    traj_path = reporting.write_csv(
        os.path.join(args.out, "trajectory.csv"),
        ["t", "norm_u", "norm_Du", "norm_v"],
        [(traj.times[k],) + norms[k] for k in range(traj.n_nodes)])
    interval_path = reporting.write_csv(
        os.path.join(args.out, "fixedpoint.csv"),
        ["t_start", "t_end", "iters", "defect", "rho"],
        [(r.t_start, r.t_end, r.iters, r.defect, r.rho)
         for r in result.intervals])
    energy_path, _ = _energy_csv(args.out, ws, config, traj)
    manifest = reporting.RunManifest(command="fixedpoint",
                                     config_text=text, seed=config.seed,
                                     threads=args.threads)
    manifest.wall_seconds = watch.elapsed()
    _finish(args.out, manifest, [traj_path, interval_path, energy_path])
    print(f"subintervals: {result.n_subintervals}, restarts: "
          f"{result.restarts}, total iterations: {result.total_iters}")
    return EXIT_OK


def _cmd_contraction(args):
    config, text = _load_config(args)
    _validate(config, full=False)
    ws = Workspace(config)
    watch = reporting.Stopwatch()
    try:
        samples = viscoelastic.measure_contraction(ws, config)
    except (SolverError, RuntimeError) as exc:
        raise _CliFailure(EXIT_SOLVER, f"solver failure: {exc}")
    os.makedirs(args.out, exist_ok=True)
    path = reporting.write_csv(
        os.path.join(args.out, "contraction.csv"),
        ["T", "rho", "iters"],
        [(s.horizon, s.rho, s.n_steps) for s in samples])
    manifest = reporting.RunManifest(command="contraction",
                                     config_text=text, seed=config.seed,
                                     threads=args.threads)
    manifest.wall_seconds = watch.elapsed()
    _finish(args.out, manifest, [path])
    return EXIT_OK


def _cmd_converge(args):
    config, text = _load_config(args)
    _validate(config, full=False)
    ws = Workspace(config)
    watch = reporting.Stopwatch()
    try:
        seq = convergence_mod.build_sequence(config)
        report = convergence_mod.run_convergence(ws, seq)
    except convergence_mod.SequenceError as exc:
        raise _CliFailure(EXIT_INVARIANT, f"sequence generation: {exc}")
    except (SolverError, viscoelastic.ContractionError,
            RuntimeError) as exc:
        raise _CliFailure(EXIT_SOLVER, f"solver failure: {exc}")
    os.makedirs(args.out, exist_ok=True)
    path = reporting.write_csv(
        os.path.join(args.out, "convergence.csv"),
        ["n", "sup_dist", "w_dist", "uniform_bound"],
        report.rows())
    manifest = reporting.RunManifest(command="converge", config_text=text,
                                     seed=config.seed,
                                     threads=args.threads)
    manifest.wall_seconds = watch.elapsed()
    _finish(args.out, manifest, [path])
    print(f"uniform bound constant C = {report.bound_constant:.6g} "
          f"(base {report.base_uniform:.6g})")
    return EXIT_OK


def _cmd_korn(args):
    config, text = _load_config(args)
    _validate(config, full=False)
    watch = reporting.Stopwatch()
    rows = []
    try:
        for level in range(args.levels):
            h = config.h / (2 ** level)
            ws = Workspace(config.with_changes(h=h))
            if ws.snapped is None:
                space = ws.space_for_extent(0.0)
            else:
                extent = ws.snapped.length if config.dim == 2 else 1.0
                space = ws.space_for_extent(extent)
            est = geometry.estimate_korn_constant(space)
            rows.append((h, est.value, est.iterations))
    except SolverError as exc:
        raise _CliFailure(EXIT_SOLVER, f"solver failure: {exc}")
    os.makedirs(args.out, exist_ok=True)
    path = reporting.write_csv(os.path.join(args.out, "korn.csv"),
                               ["h", "korn", "iters"], rows)
    manifest = reporting.RunManifest(command="korn", config_text=text,
                                     seed=config.seed,
                                     threads=args.threads)
    manifest.wall_seconds = watch.elapsed()
    _finish(args.out, manifest, [path])
    return EXIT_OK


def _cmd_validate(args):
    config, text = _load_config(args)
    report = _validate(config, full=True)
    os.makedirs(args.out, exist_ok=True)
    lines = [f"{issue.level}: [{issue.code}] {issue.message}"
             for issue in report.issues]
    path = os.path.join(args.out, "validation.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    manifest = reporting.RunManifest(command="validate", config_text=text,
                                     seed=config.seed,
                                     threads=args.threads)
    manifest.add_file(path)
    manifest.write(args.out)
    print("scenario valid")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fixedpoint": _cmd_fixedpoint,
    "contraction": _cmd_contraction,
    "converge": _cmd_converge,
    "korn": _cmd_korn,
    "validate": _cmd_validate,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
