"""Command-line driver: trace branches, switch at bifurcations, export, report.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O error.
``CMC_TRACE_THREADS`` caps BLAS threading; it is applied before the numerical
modules are imported, which is why everything below is imported lazily.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

_TRACE_DEFAULTS = {
    "problem": None,
    "n": 24,
    "m": 24,
    "l": 0.2,
    "h": 0.1,
    "steps": 100,
    "newton_tol": 1e-10,
    "min_step": 1e-4,
    "out": "run",
    "emit_surfaces": False,
    "format": "obj",
    "eigen_log": True,
    "branch_csv": True,
    "adapt": False,
    "refine": True,
    "v_min": None,
    "v_max": None,
}


def _apply_thread_cap() -> None:
    cap = os.environ.get("CMC_TRACE_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(var, cap)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmc-trace",
        description="Trace families of discrete constant-mean-curvature surfaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p, with_problem: bool):
        if with_problem:
            p.add_argument("--problem", choices=("disk", "rivulet", "bridge"))
            p.add_argument("--n", type=int)
            p.add_argument("--m", type=int)
            p.add_argument("--l", type=float, help="strip half-width (rivulet)")
        p.add_argument("--h", type=float, help="predictor step length (sign = direction)")
        p.add_argument("--steps", type=int, help="maximum number of steps")
        p.add_argument("--newton-tol", dest="newton_tol", type=float)
        p.add_argument("--min-step", dest="min_step", type=float)
        p.add_argument("--out", help="output directory")
        p.add_argument("--emit-surfaces", dest="emit_surfaces", action="store_true",
                       default=None, help="write one surface file per accepted point")
        p.add_argument("--format", choices=("obj", "vtk"), help="surface export format")
        p.add_argument("--no-eigen-log", dest="eigen_log", action="store_false",
                       default=None)
        p.add_argument("--adapt", action="store_true", default=None,
                       help="enable step-length adaptation")
        p.add_argument("--no-refine", dest="refine", action="store_false",
                       default=None, help="skip bifurcation refinement")
        p.add_argument("--v-min", dest="v_min", type=float)
        p.add_argument("--v-max", dest="v_max", type=float)
        p.add_argument("--config", help="JSON file with the same keys; flags override")

    p_trace = sub.add_parser("trace", help="trace a branch from the initial surface")
    add_run_flags(p_trace, with_problem=True)

    p_switch = sub.add_parser("switch", help="switch branches at a checkpointed bifurcation")
    p_switch.add_argument("--checkpoint", required=True)
    p_switch.add_argument("--direction", type=int, choices=(1, -1), default=1)
    add_run_flags(p_switch, with_problem=False)

    p_export = sub.add_parser("export", help="export a checkpointed surface")
    p_export.add_argument("--checkpoint", required=True)
    p_export.add_argument("--format", choices=("obj", "vtk"), default="obj")
    p_export.add_argument("--out", required=True, help="output file")

    p_report = sub.add_parser("report", help="render figures for a finished run")
    p_report.add_argument("--run", required=True, help="run directory with branch.csv")
    p_report.add_argument("--out", help="figure directory (default: the run directory)")
    return parser


class _ConfigError(Exception):
    pass


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = dict(_TRACE_DEFAULTS)
    path = getattr(args, "config", None)
    if path:
        try:
            file_cfg = json.loads(Path(path).read_text())
        except OSError as exc:
            raise _ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise _ConfigError(f"bad config file: {exc}") from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise _ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _fail(code: int, message: str) -> int:
    print(f"cmc-trace: error: {message}", file=sys.stderr)
    return code


def _continuation_config(cfg: dict):
    from .continuation import ContinuationConfig
    return ContinuationConfig(
        h=float(cfg["h"]), max_steps=int(cfg["steps"]),
        newton_tol=float(cfg["newton_tol"]), min_step=float(cfg["min_step"]),
        adapt=bool(cfg["adapt"]), refine_bifurcations=bool(cfg["refine"]),
        v_min=cfg["v_min"], v_max=cfg["v_max"])


def _write_outputs(outdir: Path, problem, branch, cfg: dict) -> None:
    from . import io as cio
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {k: v for k, v in cfg.items()}
    meta["problem"] = problem.name
    meta.update(problem.params)
    (outdir / "run.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    chash = cio.config_hash(meta)
    if cfg["branch_csv"]:
        cio.write_branch_csv(outdir / "branch.csv", branch)
    if cfg["eigen_log"]:
        cio.write_eigen_csv(outdir / "eigen.csv", branch)
    cio.write_events_csv(outdir / "events.csv", branch)
    n_bif = 0
    for event in branch.events:
        if event.kind == "beta-sign-change" and event.point is not None:
            cio.save_checkpoint(outdir / f"bifurcation_{n_bif:03d}.ckpt",
                                problem, event.point, chash)
            n_bif += 1
    if branch.points:
        cio.save_checkpoint(outdir / "final.ckpt", problem, branch.points[-1], chash)
    if cfg["emit_surfaces"]:
        surf_dir = outdir / "surfaces"
        surf_dir.mkdir(exist_ok=True)
        ext = "obj" if cfg["format"] == "obj" else "vtk"
        for pt in branch.points:
            cio.export_surface(pt, cfg["format"],
                               surf_dir / f"step_{pt.arc_index:04d}.{ext}",
                               problem.ops)


def cmd_trace(args) -> int:
    try:
        cfg = _merge_config(args)
    except _ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    if not cfg["problem"]:
        return _fail(EXIT_CONFIG, "trace needs --problem (disk, rivulet or bridge)")
    from .continuation import trace
    from .errors import CmcTraceError
    from .problems import build_problem
    from .system import make_base_state
    try:
        problem = build_problem(cfg["problem"], n=int(cfg["n"]), m=int(cfg["m"]),
                                l=float(cfg["l"]) if cfg["l"] is not None else None)
        config = _continuation_config(cfg)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        base = make_base_state(problem.initial_surface, problem.lambda0,
                               problem.ops, problem.vol)
        branch = trace(base, config, problem.ops, problem.bc, problem.vol,
                       log=lambda msg: print(msg, file=sys.stderr))
    except CmcTraceError as exc:
        return _fail(EXIT_SOLVER, str(exc))
    try:
        _write_outputs(Path(cfg["out"]), problem, branch, cfg)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    failures = [e for e in branch.events if e.kind == "step-failure"]
    if failures:
        return _fail(EXIT_SOLVER,
                     f"trace halted by step failure at step {failures[-1].step} "
                     f"({failures[-1].message})")
    return EXIT_OK


def cmd_switch(args) -> int:
    try:
        cfg = _merge_config(args)
    except _ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    from .continuation import branch_switch, trace
    from .errors import CmcTraceError
    from . import io as cio
    try:
        ck = cio.load_checkpoint(args.checkpoint)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    problem = ck.problem
    config = _continuation_config(cfg)
    direction = int(args.direction)
    try:
        first = branch_switch(ck.base, config, problem.ops, problem.bc,
                              problem.vol, direction=direction,
                              symmetry_defect=problem.symmetry_defect)
        branch = trace(first.base, config, problem.ops, problem.bc, problem.vol,
                       log=lambda msg: print(msg, file=sys.stderr))
    except CmcTraceError as exc:
        return _fail(EXIT_SOLVER, str(exc))
    if cfg["out"] != _TRACE_DEFAULTS["out"]:
        outdir = Path(cfg["out"])
    else:
        run_dir = Path(args.checkpoint).resolve().parent
        outdir = run_dir.with_name(run_dir.name + f".branch{direction:+d}")
    try:
        _write_outputs(outdir, problem, branch, cfg)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    return EXIT_OK


def cmd_export(args) -> int:
    import numpy as np
    from .continuation import BranchPoint
    from . import io as cio
    try:
        ck = cio.load_checkpoint(args.checkpoint)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    point = BranchPoint(base=ck.base, stability=None, tangent_used=ck.tangent,
                        arc_index=0, phi=np.zeros(ck.base.grid.k), newton_iters=0)
    try:
        cio.export_surface(point, args.format, args.out, ck.problem.ops)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import render_run
    try:
        written = render_run(args.run, args.out)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    for p in written:
        print(p)
    return EXIT_OK


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"trace": cmd_trace, "switch": cmd_switch,
                "export": cmd_export, "report": cmd_report}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
