"""Command-line front end.

One JSON config document per experiment (flat keys mirroring the type
fields), an output directory, and a subcommand. All randomness is seeded from
the config, so every command is deterministic given the config file. Exit
codes: 0 success, 1 numerical failure (with an error report written to the
output directory), 2 config or I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import constructor, detector, landscape, manifold, mlp, sam_core
from ._io import atomic_write_json, atomic_write_text, fmt

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2

NUMERICAL_ERRORS = (
    sam_core.DivergenceError,
    sam_core.DegenerateGradientError,
    constructor.ConstructionError,
    manifold.NewtonError,
    detector.AttractorConditionError,
)


class ConfigError(ValueError):
    pass


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="samhall",
        description="SAM dynamics, hallucinated-minimizer construction and detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "drive a GD/SAM/switch trajectory and classify its terminal point"),
        ("field", "export f, SAM objective, and shifted-gradient field grids (dim 2)"),
        ("sweep", "run a (rho, seed, mode) sweep and aggregate final losses"),
        ("construct", "build a hallucinated minimizer from a minimizer/maximizer pair"),
        ("continue", "trace preimages of a minimizer curve from a known (x_h, rho)"),
        ("slice", "evaluate f and the SAM objective on a plane through a center"),
        ("train-mlp", "train the two-layer tanh classifier with GD/SAM/switch"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--out", help="output directory (falls back to config key 'out')")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        out_dir = args.out or cfg.get("out")
        if not out_dir:
            raise ConfigError("no output directory: pass --out or set 'out' in the config")
        os.makedirs(out_dir, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise ConfigError(f"output directory {out_dir!r} is not writable")
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"samhall: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    handler = {
        "run": cmd_run,
        "field": cmd_field,
        "sweep": cmd_sweep,
        "construct": cmd_construct,
        "continue": cmd_continue,
        "slice": cmd_slice,
        "train-mlp": cmd_train_mlp,
    }[args.command]

    try:
        handler(cfg, out_dir, threads=args.threads)
    except (ConfigError, landscape.LandscapeError, ValueError, KeyError, OSError) as exc:
        print(f"samhall: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        report = {"error": type(exc).__name__, "message": str(exc)}
        traj = getattr(exc, "trajectory", None)
        if traj is not None:
            report["last_finite_state"] = sam_core.trajectory_sidecar(traj)
        atomic_write_json(os.path.join(out_dir, "error_report.json"), report)
        print(f"samhall: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _load_config(path):
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _build_objective(cfg):
    name = cfg.get("objective")
    if name is None:
        raise ConfigError("config key 'objective' is required")
    if name == "mlp":
        spec, data = _mlp_parts(cfg)
        return mlp.as_objective(spec, data)
    params = dict(cfg.get("objective_params", {}))
    if name == "quadratic" and "A" in params:
        params["A"] = np.asarray(params["A"], dtype=np.float64)
        if "b" in params:
            params["b"] = np.asarray(params["b"], dtype=np.float64)
    return landscape.make_builtin(name, **params)


def _mlp_parts(cfg):
    try:
        spec = mlp.MlpSpec(**cfg["mlp"])
        ds = cfg["dataset"]
        data = mlp.make_dataset(ds["kind"], ds["n_per_class"], ds["class_count"],
                                ds["noise"], ds["seed"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad mlp/dataset config: {exc}") from None
    return spec, data


def _sam_config(cfg):
    try:
        return sam_core.SamConfig(
            rho=float(cfg["rho"]),
            eta=float(cfg["eta"]),
            mode=cfg.get("mode", "sam"),
            switch_fraction=float(cfg.get("switch_fraction", 0.10)),
            max_iters=int(cfg.get("max_iters", 100_000)),
            grad_floor=float(cfg.get("grad_floor", 1e-12)),
            converge_tol=float(cfg.get("converge_tol", 1e-9)),
            seed=int(cfg.get("seed", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing SAM config key {exc}") from None


def _initial_point(cfg, obj):
    if "x0" in cfg:
        return landscape.as_point(cfg["x0"], obj.dim)
    if cfg.get("objective") == "mlp":
        spec, _ = _mlp_parts(cfg)
        return mlp.init_params(spec)
    raise ConfigError("config key 'x0' is required for builtin objectives")


def _write_run_outputs(obj, cfg, traj, out_dir):
    sam_core.trajectory_to_csv(traj, os.path.join(out_dir, "trajectory.csv"))
    sam_core.trajectory_to_json(traj, os.path.join(out_dir, "trajectory.json"))
    report = detector.classify(
        obj,
        traj.terminal_point,
        float(cfg["rho"]),
        seed=int(cfg.get("seed", 0)),
    )
    detector.report_to_json(report, os.path.join(out_dir, "stationary_report.json"))
    return report


def cmd_run(cfg, out_dir, threads=1):
    obj = _build_objective(cfg)
    scfg = _sam_config(cfg)
    x0 = _initial_point(cfg, obj)
    traj = sam_core.run(obj, scfg, x0, int(cfg.get("record_every", 1)))
    _write_run_outputs(obj, cfg, traj, out_dir)


def cmd_train_mlp(cfg, out_dir, threads=1):
    if cfg.get("objective") != "mlp":
        raise ConfigError("train-mlp requires objective 'mlp'")
    obj = _build_objective(cfg)
    scfg = _sam_config(cfg)
    x0 = _initial_point(cfg, obj)
    traj = mlp.train(obj, scfg, x0, int(cfg.get("record_every", 1)),
                     momentum=float(cfg.get("momentum", 0.0)))
    _write_run_outputs(obj, cfg, traj, out_dir)


# ---------------------------------------------------------------------------
# field export


def cmd_field(cfg, out_dir, threads=1):
    obj = _build_objective(cfg)
    if obj.dim != 2:
        raise ConfigError("field requires a 2-dimensional objective")
    rho = float(cfg["rho"])
    box = np.asarray(cfg.get("box", obj.default_box), dtype=np.float64)
    n = int(cfg.get("grid_points", 400))
    grad_floor = float(cfg.get("grad_floor", 1e-12))
    value_tol = float(cfg.get("minimizer_value_tol", 1e-3))

    xs = np.linspace(box[0, 0], box[0, 1], n)
    ys = np.linspace(box[1, 0], box[1, 1], n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    vals, grads = landscape.batch_value_grad(obj, pts)
    gns = np.linalg.norm(grads, axis=1)
    ok = gns >= grad_floor

    fsam = np.full(len(pts), math.nan)
    sgvec = np.full((len(pts), 2), math.nan)
    shifted_pts = pts[ok] + rho * grads[ok] / gns[ok][:, None]
    sv, sg = landscape.batch_value_grad(obj, shifted_pts)
    fsam[ok] = sv
    sgvec[ok] = sg

    _write_grid(os.path.join(out_dir, "grid_f.csv"), "x,y,f", pts, vals[:, None])
    _write_grid(os.path.join(out_dir, "grid_fsam.csv"), "x,y,fsam", pts, fsam[:, None])
    _write_grid(os.path.join(out_dir, "field.csv"), "x,y,gx,gy", pts, sgvec)

    fmin = np.nanmin(fsam)
    cand = pts[np.isfinite(fsam) & (fsam <= fmin + value_tol)]
    rows = []
    for c in cand:
        rows.append(_refined_minimizer_row(obj, c, rho, grad_floor,
                                           int(cfg.get("refine_max_steps", 300))))
    header = ("x,y,fsam,grad_norm,shifted_grad_norm,gamma,"
              "dist_curve,dist_minimizer_set")
    atomic_write_text(
        os.path.join(out_dir, "sam_minimizers.csv"),
        "\n".join([header] + [",".join(fmt(v) for v in r) for r in rows]) + "\n",
    )


def _write_grid(path, header, pts, cols):
    lines = [header]
    for p, c in zip(pts, cols):
        lines.append(",".join(fmt(v) for v in (*p, *c)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def refine_sam_minimizer(obj, x0, rho, grad_floor=1e-12, max_steps=300, target=1e-8):
    """Descend the exact SAM gradient with backtracking from a candidate cell."""
    x = np.asarray(x0, dtype=np.float64).copy()
    try:
        f_cur = sam_core.sam_value(obj, x, rho, grad_floor)
    except sam_core.DegenerateGradientError:
        return x
    t0 = 1.0
    for _ in range(max_steps):
        try:
            eg = sam_core.sam_exact_gradient(obj, x, rho, grad_floor)
            sgn = float(np.linalg.norm(sam_core.shifted_gradient(obj, x, rho, grad_floor)))
        except sam_core.DegenerateGradientError:
            break
        if sgn < target:
            break
        egn2 = float(eg @ eg)
        t, accepted = t0, False
        while t > 1e-18:
            cand = x - t * eg
            try:
                f_cand = sam_core.sam_value(obj, cand, rho, grad_floor)
            except sam_core.DegenerateGradientError:
                f_cand = math.inf
            if f_cand <= f_cur - 1e-4 * t * egn2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        x, f_cur, t0 = cand, f_cand, min(2.0 * t, 1.0)
    return x


def _refined_minimizer_row(obj, cell, rho, grad_floor, max_steps):
    x = refine_sam_minimizer(obj, cell, rho, grad_floor, max_steps)
    raw = float(np.linalg.norm(obj.grad_fn(x)))
    try:
        sgn = float(np.linalg.norm(sam_core.shifted_gradient(obj, x, rho, grad_floor)))
        fsam = sam_core.sam_value(obj, x, rho, grad_floor)
    except sam_core.DegenerateGradientError:
        sgn, fsam = math.nan, math.nan
    try:
        gamma = detector.attractor_margin(obj, x, rho, grad_floor)
    except Exception:
        gamma = math.nan
    if obj.name == "synthetic2d":
        dist_curve = float(landscape.distance_to_minimizer_curve([x], lo=-2.5, hi=2.5)[0])
        dist_set = float(landscape.distance_to_minimizer_curve([x])[0])
    else:
        dist_curve = dist_set = math.nan
    return (x[0], x[1], fsam, raw, sgn, gamma, dist_curve, dist_set)


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(cfg, out_dir, threads=1):
    rho_list = cfg.get("rho_list") or []
    seed_list = cfg.get("seed_list") or []
    modes = cfg.get("modes", ["sam"])
    if not rho_list:
        raise ConfigError("rho_list must be non-empty")
    if not seed_list:
        raise ConfigError("seed_list must be non-empty")
    is_mlp = cfg.get("objective") == "mlp"
    obj = _build_objective(cfg)
    x0_range = cfg.get("x0_range")
    if not is_mlp and x0_range is None:
        raise ConfigError("x0_range is required for builtin sweeps")

    def start_point(seed):
        if is_mlp:
            spec, _ = _mlp_parts(cfg)
            return mlp.init_params(mlp.MlpSpec(
                spec.input_dim, spec.hidden_dim, spec.class_count,
                spec.init_scale, seed))
        rng = np.random.default_rng(seed)
        lo, hi = float(x0_range[0]), float(x0_range[1])
        return rng.uniform(lo, hi, obj.dim)

    jobs = [(rho, seed, mode) for rho in rho_list for seed in seed_list for mode in modes]

    def one(job):
        rho, seed, mode = job
        scfg = sam_core.SamConfig(
            rho=float(rho),
            eta=float(cfg["eta"]),
            mode=mode,
            switch_fraction=float(cfg.get("switch_fraction", 0.10)),
            max_iters=int(cfg.get("max_iters", 100_000)),
            grad_floor=float(cfg.get("grad_floor", 1e-12)),
            converge_tol=float(cfg.get("converge_tol", 1e-9)),
            seed=int(seed),
        )
        try:
            traj = sam_core.run(obj, scfg, start_point(seed),
                                record_every=max(1, scfg.max_iters // 10))
        except sam_core.DivergenceError as exc:
            traj = exc.trajectory
            status = "diverged"
        else:
            status = traj.terminal_status
        report = detector.classify(obj, traj.terminal_point, float(rho), seed=int(seed))
        return {
            "rho": float(rho),
            "seed": int(seed),
            "mode": mode,
            "final_loss": float(traj.fs[-1]),
            "final_grad_norm": float(traj.grad_norms[-1]),
            "final_shifted_grad_norm": float(traj.shifted_grad_norms[-1]),
            "classification": report.classification,
            "status": status,
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]

    run_lines = ["rho,seed,mode,final_loss,final_grad_norm,final_shifted_grad_norm,classification,status"]
    for r in results:
        run_lines.append(
            f"{fmt(r['rho'])},{r['seed']},{r['mode']},{fmt(r['final_loss'])},"
            f"{fmt(r['final_grad_norm'])},{fmt(r['final_shifted_grad_norm'])},"
            f"{r['classification']},{r['status']}"
        )
    atomic_write_text(os.path.join(out_dir, "runs.csv"), "\n".join(run_lines) + "\n")

    sum_lines = ["rho,mode,mean_final_loss,std_final_loss,runs,hallucinated"]
    for rho in rho_list:
        for mode in modes:
            sel = [r for r in results if r["rho"] == float(rho) and r["mode"] == mode]
            losses = np.array([r["final_loss"] for r in sel])
            n_hall = sum(r["classification"] == detector.HALLUCINATED_MINIMIZER for r in sel)
            sum_lines.append(
                f"{fmt(rho)},{mode},{fmt(losses.mean())},{fmt(losses.std())},"
                f"{len(sel)},{n_hall}"
            )
    atomic_write_text(os.path.join(out_dir, "summary.csv"), "\n".join(sum_lines) + "\n")


# ---------------------------------------------------------------------------
# construction, continuation, slices


def cmd_construct(cfg, out_dir, threads=1):
    obj = _build_objective(cfg)
    if obj.dim > 3:
        raise ConfigError("construction unsupported in this dimension (grid cost)")
    if "x_star" not in cfg:
        raise ConfigError("config key 'x_star' is required")
    x_star = landscape.as_point(cfg["x_star"], obj.dim)
    box = np.asarray(cfg.get("box", obj.default_box), dtype=np.float64)
    resolution = cfg.get("resolution")
    if resolution is None:
        raise ConfigError("config key 'resolution' (grid spacing) is required")

    auto_bullet = "x_bullet" not in cfg
    if auto_bullet:
        x_bullet = _grid_argmax(obj, box, float(np.min(np.asarray(resolution))))
    else:
        x_bullet = landscape.as_point(cfg["x_bullet"], obj.dim)

    epsilon = cfg.get("epsilon")
    if epsilon is None:
        epsilon = _default_epsilon(obj, box, x_bullet)

    mask = constructor.superlevel_component(obj, box, resolution, x_bullet, float(epsilon))
    mask.to_csv(os.path.join(out_dir, "component_mask.csv"))
    report = constructor.construct_hallucinated(
        obj, x_star, x_bullet, float(epsilon), box, resolution,
        refine=bool(cfg.get("refine", True)),
    )
    doc = report.to_dict()
    doc["x_bullet_auto"] = auto_bullet
    atomic_write_json(os.path.join(out_dir, "construction_report.json"), doc)


def _grid_argmax(obj, box, spacing):
    axes = [np.arange(lo + spacing / 2, hi, spacing) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    vals, _ = landscape.batch_value_grad(obj, pts)
    return pts[int(np.argmax(vals))]


def _default_epsilon(obj, box, x_bullet):
    # a quarter of the bullet-to-boundary value gap, a convention only
    edges = []
    for k, (lo, hi) in enumerate(box):
        for v in (lo, hi):
            p = x_bullet.copy()
            p[k] = v
            edges.append(float(obj.value_fn(p)))
    m_hat = max(edges)
    big_m = float(obj.value_fn(x_bullet))
    if big_m <= m_hat:
        raise ConfigError("cannot pick epsilon: x_bullet does not dominate the box edge")
    return 0.25 * (big_m - m_hat)


def cmd_continue(cfg, out_dir, threads=1):
    obj = _build_objective(cfg)
    x_h = landscape.as_point(cfg["x_h"], obj.dim)
    rho = float(cfg["rho"])
    max_step = float(cfg.get("max_step", 0.5))
    if "curve_points" in cfg:
        curve = np.asarray(cfg["curve_points"], dtype=np.float64)
    elif cfg.get("curve") == "synthetic2d_minimizers":
        if obj.name != "synthetic2d":
            raise ConfigError("the builtin curve requires the synthetic2d objective")
        curve = _auto_curve(obj, x_h, rho, int(cfg.get("curve_samples", 41)))
    else:
        raise ConfigError("provide 'curve_points' or curve='synthetic2d_minimizers'")
    result = manifold.continue_manifold(
        obj, x_h, rho, curve, max_step,
        newton_tol=float(cfg.get("newton_tol", 1e-10)),
        max_newton=int(cfg.get("max_newton", 50)),
    )
    result.to_csv(os.path.join(out_dir, "continuation.csv"))


def _auto_curve(obj, x_h, rho, samples):
    """Curve samples starting at the parameter nearest the shifted point of
    x_h and sweeping to the farther end of the minimizer segment."""
    u = sam_core.ascent_direction(obj, x_h)
    if u is None:
        raise ConfigError("x_h has a degenerate gradient")
    x_star = x_h + rho * u
    params = np.linspace(-0.6, 0.6, 4001)
    pts = np.column_stack([-1.55 * np.cos(params / 1.5), params])
    y0 = params[int(np.argmin(((pts - x_star) ** 2).sum(axis=1)))]
    y_end = -0.6 if abs(y0 - (-0.6)) > abs(y0 - 0.6) else 0.6
    ys = np.linspace(y0, y_end, samples)
    return np.column_stack([-1.55 * np.cos(ys / 1.5), ys])


def cmd_slice(cfg, out_dir, threads=1):
    obj = _build_objective(cfg)
    rho = float(cfg["rho"])
    if "center" in cfg:
        center = landscape.as_point(cfg["center"], obj.dim)
    elif "center_path" in cfg:
        with open(cfg["center_path"]) as fh:
            center = landscape.as_point(json.load(fh)["terminal_point"], obj.dim)
    else:
        raise ConfigError("provide 'center' or 'center_path'")
    if "dir_u" in cfg and "dir_v" in cfg:
        dir_u = landscape.as_point(cfg["dir_u"], obj.dim)
        dir_v = landscape.as_point(cfg["dir_v"], obj.dim)
    else:
        rng = np.random.default_rng(int(cfg.get("dir_seed", 0)))
        dir_u = rng.standard_normal(obj.dim)
        dir_v = rng.standard_normal(obj.dim)
    alphas = _axis_from_range(cfg.get("alpha_range", [-1.0, 1.0, 41]))
    betas = _axis_from_range(cfg.get("beta_range", [-1.0, 1.0, 41]))
    grid = mlp.plane_slice(obj, center, dir_u, dir_v, alphas, betas, rho)
    grid.to_csv(os.path.join(out_dir, "slice.csv"))


def _axis_from_range(spec):
    lo, hi, n = float(spec[0]), float(spec[1]), int(spec[2])
    return np.linspace(lo, hi, n)


if __name__ == "__main__":
    sys.exit(main())
