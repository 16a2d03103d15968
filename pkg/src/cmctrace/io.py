"""Persistence: branch logs, eigenvalue logs, checkpoints and surface export.

All delimited output uses 17 significant digits so doubles round-trip
losslessly for regression diffs.  Checkpoints are a versioned, binary-free
text container (explicit field names, decimal floats) that rebuilds a
converged base state byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .continuation import Branch, BranchPoint
from .geometry import Surface, fundamental_forms
from .problems import ProblemSpec, build_problem
from .spectral import FOURIER, Operators
from .system import BaseState, make_base_state

CHECKPOINT_MAGIC = "cmctrace-checkpoint"
CHECKPOINT_VERSION = 1
BRANCH_HEADER = "step,V,lambda,z_max,mu_min,index,beta,newton_iters"


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def fmt_row(values) -> str:
    return " ".join(fmt(v) for v in values)


# --------------------------------------------------------------------------
# delimited logs
# --------------------------------------------------------------------------

def write_branch_csv(path, branch: Branch) -> None:
    lines = [BRANCH_HEADER]
    for pt in branch.points:
        lines.append(",".join([
            str(pt.arc_index), fmt(pt.volume), fmt(pt.lam), fmt(pt.z_max),
            fmt(pt.stability.mu_min), str(pt.stability.index),
            str(pt.stability.beta), str(pt.newton_iters),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_branch_csv(path) -> np.ndarray:
    return np.genfromtxt(path, delimiter=",", names=True)


def write_eigen_csv(path, branch: Branch, count: int = 10) -> None:
    """Log of the ``count`` smallest finite twisted eigenvalues per point."""
    header = "step," + ",".join(f"mu_{i:02d}" for i in range(count))
    lines = [header]
    for pt in branch.points:
        ev = pt.stability.eigenvalues[:count]
        cells = [fmt(v) for v in ev] + [""] * (count - len(ev))
        lines.append(",".join([str(pt.arc_index)] + cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_events_csv(path, branch: Branch) -> None:
    lines = ["step,type,V_star,message"]
    for e in branch.events:
        v = fmt(e.v_star) if e.v_star is not None else ""
        lines.append(f"{e.step},{e.kind},{v},{e.message}")
    Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

@dataclass
class Checkpoint:
    problem: ProblemSpec
    base: BaseState
    tangent: np.ndarray
    config_hash: str
    version: int = CHECKPOINT_VERSION


def config_hash(config_dict: dict) -> str:
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_checkpoint(path, problem: ProblemSpec, point: BranchPoint,
                    cfg_hash: str = "-") -> None:
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
             f"problem {problem.name}"]
    for key, val in problem.params.items():
        lines.append(f"{key} {fmt(val) if isinstance(val, float) else val}")
    lines += [
        f"lambda {fmt(point.lam)}",
        f"volume {fmt(point.volume)}",
        f"config_hash {cfg_hash}",
        f"x {fmt_row(point.surface.x)}",
        f"y {fmt_row(point.surface.y)}",
        f"z {fmt_row(point.surface.z)}",
        f"tangent {fmt_row(point.tangent_used)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> Checkpoint:
    text = Path(path).read_text().strip().splitlines()
    head = text[0].split()
    if head[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a checkpoint file")
    version = int(head[1])
    if version > CHECKPOINT_VERSION:
        raise ValueError(f"checkpoint version {version} is newer than supported")
    fields = {}
    for line in text[1:]:
        key, _, rest = line.partition(" ")
        fields[key] = rest
    problem = build_problem(fields["problem"],
                            n=int(fields["n"]), m=int(fields["m"]),
                            l=float(fields["l"]) if "l" in fields else None)
    grid = problem.grid
    x = np.array(fields["x"].split(), dtype=float)
    y = np.array(fields["y"].split(), dtype=float)
    z = np.array(fields["z"].split(), dtype=float)
    surface = Surface(grid=grid, x=x, y=y, z=z)
    base = make_base_state(surface, float(fields["lambda"]), problem.ops, problem.vol)
    tangent = np.array(fields["tangent"].split(), dtype=float)
    return Checkpoint(problem=problem, base=base, tangent=tangent,
                      config_hash=fields.get("config_hash", "-"),
                      version=version)


# --------------------------------------------------------------------------
# surface export
# --------------------------------------------------------------------------

def export_surface(point: BranchPoint, fmt_name: str, path,
                   ops: Operators) -> None:
    """Write a converged point's surface as Wavefront OBJ or legacy VTK ASCII.

    OBJ: vertices in grid-major order with quad faces over grid cells (the
    periodic Fourier direction is wrapped).  VTK: STRUCTURED_GRID with point
    data arrays phi_last, H and K.
    """
    if fmt_name == "obj":
        _export_obj(point.surface, path)
    elif fmt_name in ("vtk", "vtk-ascii"):
        _export_vtk(point, path, ops)
    else:
        raise ValueError(f"unknown export format {fmt_name!r}; use obj or vtk")


def _export_obj(surface: Surface, path) -> None:
    grid = surface.grid
    pu, pv = grid.points_u, grid.points_v
    lines = [f"# cmctrace surface, {pu} x {pv} grid"]
    for xi, yi, zi in zip(surface.x, surface.y, surface.z):
        lines.append(f"v {fmt(xi)} {fmt(yi)} {fmt(zi)}")
    wrap_v = grid.kind_v == FOURIER
    wrap_u = grid.kind_u == FOURIER
    nu = pu if wrap_u else pu - 1
    nv = pv if wrap_v else pv - 1
    for i in range(nu):
        i1 = (i + 1) % pu
        for j in range(nv):
            j1 = (j + 1) % pv
            a = i * pv + j + 1
            b = i1 * pv + j + 1
            c = i1 * pv + j1 + 1
            d = i * pv + j1 + 1
            lines.append(f"f {a} {b} {c} {d}")
    Path(path).write_text("\n".join(lines) + "\n")


def _export_vtk(point: BranchPoint, path, ops: Operators) -> None:
    surface = point.surface
    grid = surface.grid
    geom = fundamental_forms(surface, ops)
    phi = point.phi if point.phi is not None else np.zeros(grid.k)
    lines = [
        "# vtk DataFile Version 3.0",
        "cmctrace surface",
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {grid.points_v} {grid.points_u} 1",
        f"POINTS {grid.k} double",
    ]
    for xi, yi, zi in zip(surface.x, surface.y, surface.z):
        lines.append(f"{fmt(xi)} {fmt(yi)} {fmt(zi)}")
    lines.append(f"POINT_DATA {grid.k}")
    for name, arr in (("phi_last", phi), ("H", geom.H), ("K", geom.K)):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(fmt(v) for v in arr)
    Path(path).write_text("\n".join(lines) + "\n")
