"""Render samhall CSV artifacts into static figures.

Consumes only the documented file schemas (grid_f/grid_fsam, field,
sam_minimizers, trajectory, summary, slice CSVs) -- no shared code with the
producer, so either side builds standalone. One process per figure; rendering
is a pure function of the inputs and the job document.

Job JSON schema (FigureJob):
    kind      "contour" | "quiver" | "surface" | "sweep"
    inputs    {"grid": ..., "field": ..., "minimizers": ..., "trajectory": ...,
               "summary": ..., "slice": ...}   (paths, per kind)
    out       output image path
    xlim/ylim optional axis limits [lo, hi]
    overlays  {"true_curve": bool, "sam_minimizers": bool, "trajectory": bool}
    title     optional
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PANEL_KINDS = ("contour", "quiver", "surface", "sweep")


class JobError(ValueError):
    pass


def load_job(path):
    with open(path) as fh:
        job = json.load(fh)
    if not isinstance(job, dict):
        raise JobError(f"{path}: job must be a JSON object")
    kind = job.get("kind")
    if kind not in PANEL_KINDS:
        raise JobError(f"{path}: panel kind must be one of {PANEL_KINDS}, got {kind!r}")
    if not job.get("out"):
        raise JobError(f"{path}: missing output image path 'out'")
    return job


def read_columns(path, required):
    """Strict CSV reader: named float columns, failures name the file and row."""
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                raise JobError(f"{path}: missing columns {missing} (header: {header})")
            for i, row in enumerate(reader, start=2):
                try:
                    rows.append([float(row[c]) for c in required])
                except (TypeError, ValueError) as exc:
                    raise JobError(f"{path}: row {i}: {exc}") from None
    except OSError as exc:
        raise JobError(f"{path}: {exc}") from None
    if not rows:
        raise JobError(f"{path}: no data rows")
    return {c: np.array(col) for c, col in zip(required, zip(*rows))}


def grid_from_xy(x, y, v):
    xs = np.unique(x)
    ys = np.unique(y)
    if xs.size * ys.size != v.size:
        raise JobError(f"grid is not rectangular: {xs.size} x {ys.size} != {v.size}")
    order = np.lexsort((y, x))
    vv = v[order].reshape(xs.size, ys.size)
    return xs, ys, np.ma.masked_invalid(vv)


def true_minimizer_curve(n=400):
    ys = np.linspace(-0.6, 0.6, n)
    return -1.55 * np.cos(ys / 1.5), ys


def add_overlays(ax, job):
    overlays = job.get("overlays", {})
    inputs = job.get("inputs", {})
    if overlays.get("true_curve"):
        cx, cy = true_minimizer_curve()
        ax.plot(cx, cy, color="white", lw=2.5)
        ax.plot(cx, cy, color="crimson", lw=1.5, label="true minimizers")
    if overlays.get("sam_minimizers"):
        path = inputs.get("minimizers")
        if path is None:
            raise JobError("overlay sam_minimizers requested but no 'minimizers' input")
        try:
            cols = read_columns(path, ["x", "y"])
            ax.scatter(cols["x"], cols["y"], s=12, color="deeppink", zorder=5,
                       label="SAM minimizers")
        except JobError as exc:
            if "no data rows" not in str(exc):
                raise
            print(f"plotkit: warning: empty minimizer overlay ({path})", file=sys.stderr)
    if overlays.get("trajectory"):
        path = inputs.get("trajectory")
        if path is None:
            raise JobError("overlay trajectory requested but no 'trajectory' input")
        cols = read_columns(path, ["k", "f"])
        # trajectories are overlaid in value space on sweep panels only; on
        # plane panels the iterates are not available in the CSV schema
        print("plotkit: note: trajectory overlay applies to sweep panels", file=sys.stderr)


def render_contour(job, ax):
    path = job.get("inputs", {}).get("grid")
    if path is None:
        raise JobError("contour panel needs inputs.grid")
    header_probe = open(path).readline().strip().split(",")
    value_col = header_probe[-1]
    cols = read_columns(path, ["x", "y", value_col])
    xs, ys, vv = grid_from_xy(cols["x"], cols["y"], cols[value_col])
    m = ax.contourf(xs, ys, vv.T, levels=40, cmap="viridis")
    plt.colorbar(m, ax=ax, shrink=0.85)
    add_overlays(ax, job)
    ax.set_xlabel("x")
    ax.set_ylabel("y")


def render_quiver(job, ax):
    path = job.get("inputs", {}).get("field")
    if path is None:
        raise JobError("quiver panel needs inputs.field")
    cols = read_columns(path, ["x", "y", "gx", "gy"])
    finite = np.isfinite(cols["gx"]) & np.isfinite(cols["gy"])
    x, y, gx, gy = (cols[c][finite] for c in ("x", "y", "gx", "gy"))
    n = max(1, int(math.sqrt(x.size) / 36))
    step = n * n if x.size > 2000 else 1
    mag = np.hypot(gx, gy)
    ax.quiver(x[::step], y[::step], gx[::step], gy[::step], mag[::step],
              cmap="viridis", angles="xy", width=0.002)
    add_overlays(ax, job)
    ax.set_xlabel("x")
    ax.set_ylabel("y")


def render_surface(job, ax_unused):
    path = job.get("inputs", {}).get("slice")
    if path is None:
        raise JobError("surface panel needs inputs.slice")
    cols = read_columns(path, ["alpha", "beta", "f", "fsam"])
    fig = plt.gcf()
    fig.clf()
    for idx, col in enumerate(("f", "fsam"), start=1):
        ax = fig.add_subplot(1, 2, idx, projection="3d")
        al, be, vv = grid_from_xy(cols["alpha"], cols["beta"], cols[col])
        aa, bb = np.meshgrid(al, be, indexing="ij")
        ax.plot_surface(aa, bb, vv, cmap="viridis", linewidth=0)
        ax.set_xlabel("alpha")
        ax.set_ylabel("beta")
        ax.set_title(col)
    return True


def render_sweep(job, ax):
    path = job.get("inputs", {}).get("summary")
    if path is None:
        raise JobError("sweep panel needs inputs.summary")
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh), start=2):
            try:
                rows.append((float(row["rho"]), row["mode"],
                             float(row["mean_final_loss"]), float(row["std_final_loss"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise JobError(f"{path}: row {i}: {exc}") from None
    if not rows:
        raise JobError(f"{path}: no data rows")
    for mode in sorted({r[1] for r in rows}):
        sel = sorted(r for r in rows if r[1] == mode)
        rho = [r[0] for r in sel]
        mean = np.array([r[2] for r in sel])
        std = np.array([r[3] for r in sel])
        ax.plot(rho, mean, marker="o", label=mode)
        ax.fill_between(rho, mean - std, mean + std, alpha=0.25)
    ax.set_xlabel("perturbation radius")
    ax.set_ylabel("final loss")
    ax.set_yscale("log")
    ax.legend()


def render(job) -> str:
    fig, ax = plt.subplots(figsize=tuple(job.get("figsize", (6.0, 5.0))))
    own_figure = False
    kind = job["kind"]
    if kind == "contour":
        render_contour(job, ax)
    elif kind == "quiver":
        render_quiver(job, ax)
    elif kind == "surface":
        own_figure = bool(render_surface(job, ax))
    elif kind == "sweep":
        render_sweep(job, ax)
    if not own_figure:
        if "xlim" in job:
            ax.set_xlim(job["xlim"])
        if "ylim" in job:
            ax.set_ylim(job["ylim"])
        if job.get("title"):
            ax.set_title(job["title"])
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="upper right")
    out = job["out"]
    plt.savefig(out, dpi=int(job.get("dpi", 130)), bbox_inches="tight")
    plt.close("all")
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit",
                                     description="render samhall artifacts to figures")
    parser.add_argument("job", help="path to a figure-job JSON document")
    args = parser.parse_args(argv)
    try:
        job = load_job(args.job)
        out = render(job)
    except (JobError, OSError, json.JSONDecodeError) as exc:
        print(f"plotkit: error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
