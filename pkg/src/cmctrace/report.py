"""Render branch data to matplotlib figures alongside the delimited output."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import load_checkpoint, read_branch_csv

plt.rcParams.update({
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def branch_figure(rows, title: str = "") -> plt.Figure:
    """Bifurcation diagram (lambda vs V, stability-coded) and minimal eigenvalue."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    stable = rows["index"] == 0
    _plot_stability_coded(ax1, rows["V"], rows["lambda"], stable)
    ax1.set_xlabel("V")
    ax1.set_ylabel("lambda = 2H")
    ax1.set_title(title or "branch")
    ax2.plot(rows["V"], rows["mu_min"], "-", color="tab:blue", lw=1.2)
    ax2.axhline(0.0, color="k", lw=0.6)
    ax2.set_xlabel("V")
    ax2.set_ylabel("smallest twisted eigenvalue")
    ax2.set_title("stability")
    fig.tight_layout()
    return fig


def _plot_stability_coded(ax, V, lam, stable) -> None:
    # draw each maximal run of constant stability as one segment
    start = 0
    for i in range(1, len(V) + 1):
        if i == len(V) or stable[i] != stable[start]:
            style = dict(ls="-", color="tab:blue") if stable[start] \
                else dict(ls="--", color="tab:red")
            seg = slice(start, i)
            ax.plot(V[seg], lam[seg], lw=1.4, **style)
            start = i
    ax.plot([], [], "-", color="tab:blue", label="stable")
    ax.plot([], [], "--", color="tab:red", label="unstable")
    ax.legend(loc="best")


def error_figure(rows, lam_oracle, z_oracle=None) -> plt.Figure:
    """Relative errors against closed-form oracles, semilog in V."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    V = rows["V"]
    keep = V != 0.0
    lam_exact = np.array([lam_oracle(v) for v in V[keep]])
    err = np.abs((rows["lambda"][keep] - lam_exact) / lam_exact)
    ax.semilogy(V[keep], np.maximum(err, 1e-18), ".-", label="lambda", ms=3)
    if z_oracle is not None:
        z_exact = np.array([z_oracle(v) for v in V[keep]])
        errz = np.abs((rows["z_max"][keep] - z_exact) / z_exact)
        ax.semilogy(V[keep], np.maximum(errz, 1e-18), ".-", label="z_max", ms=3)
    ax.set_xlabel("V")
    ax.set_ylabel("relative error")
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


def surface_figure(surface, title: str = "") -> plt.Figure:
    """3-D wireframe of a surface (periodic direction closed)."""
    grid = surface.grid
    X = grid.reshape(surface.x)
    Y = grid.reshape(surface.y)
    Z = grid.reshape(surface.z)
    if grid.kind_v == "fourier":
        X = np.hstack([X, X[:, :1]])
        Y = np.hstack([Y, Y[:, :1]])
        Z = np.hstack([Z, Z[:, :1]])
    fig = plt.figure(figsize=(4.5, 4.2))
    ax = fig.add_subplot(projection="3d")
    ax.plot_wireframe(X, Y, Z, rstride=1, cstride=1, lw=0.4, color="tab:blue")
    ax.set_title(title)
    ax.set_box_aspect((np.ptp(X), np.ptp(Y), max(np.ptp(Z), 1e-3)))
    fig.tight_layout()
    return fig


def render_run(run_dir, out_dir=None) -> list[Path]:
    """Render the default figure set for a finished run directory.

    Reads run.json and branch.csv; writes branch.png, errors.png (when the
    problem has a closed-form pressure oracle) and surface.png (from the
    final checkpoint) next to the delimited output.
    """
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = json.loads((run_dir / "run.json").read_text())
    rows = read_branch_csv(run_dir / "branch.csv")
    rows = np.atleast_1d(rows)
    written = []

    fig = branch_figure(rows, title=meta.get("problem", ""))
    p = out_dir / "branch.png"
    fig.savefig(p)
    plt.close(fig)
    written.append(p)

    problem = meta.get("problem")
    if problem == "disk" and len(rows) > 1:
        from .problems import cap_height_of_volume, cap_lambda_of_volume
        fig = error_figure(rows, cap_lambda_of_volume, cap_height_of_volume)
        p = out_dir / "errors.png"
        fig.savefig(p)
        plt.close(fig)
        written.append(p)
    elif problem == "rivulet" and len(rows) > 1:
        from .problems import rivulet_lambda_of_volume
        l = float(meta["l"])
        fig = error_figure(rows, lambda v: rivulet_lambda_of_volume(v, l))
        p = out_dir / "errors.png"
        fig.savefig(p)
        plt.close(fig)
        written.append(p)

    final = run_dir / "final.ckpt"
    if final.exists():
        ck = load_checkpoint(final)
        fig = surface_figure(ck.base.surface0,
                             title=f"{problem}: V={ck.base.volume0:.4f}")
        p = out_dir / "surface.png"
        fig.savefig(p)
        plt.close(fig)
        written.append(p)
    return written
