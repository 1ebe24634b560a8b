"""SAM objective, shifted/exact gradients, and the trajectory driver.

The driver iterates x_{k+1} = x_k - eta * g_k where g_k is the raw gradient in
gd phases and the shifted gradient grad f(x + rho*u(x)) in sam phases, with
u(x) = grad f(x) / |grad f(x)|. Where the raw gradient falls below the floor
the ascent direction (and the SAM objective) is undefined; the driver stops
there rather than perturbing with an arbitrary direction, so landing on a true
critical point is observable as a distinct terminal status.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from ._io import atomic_write_json, atomic_write_text, fmt
from .landscape import Objective, as_point

MODES = ("gd", "sam", "switch")
DIVERGENCE_LIMIT = 1e12


class DegenerateGradientError(ValueError):
    """SAM quantities are undefined where the gradient vanishes."""


class DivergenceError(RuntimeError):
    """An iterate left the finite range; carries the last finite state."""

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class SamConfig:
    rho: float
    eta: float
    mode: str = "sam"
    switch_fraction: float = 0.10
    max_iters: int = 100_000
    grad_floor: float = 1e-12
    converge_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 < self.switch_fraction < 1.0:
            raise ValueError("switch_fraction must be in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.grad_floor <= 0 or self.converge_tol <= 0:
            raise ValueError("grad_floor and converge_tol must be > 0")

    def gd_steps(self) -> int:
        if self.mode == "gd":
            return self.max_iters
        if self.mode == "switch":
            return math.ceil(self.switch_fraction * self.max_iters)
        return 0


@dataclass
class Trajectory:
    ks: np.ndarray
    fs: np.ndarray
    grad_norms: np.ndarray
    shifted_grad_norms: np.ndarray
    points: np.ndarray
    terminal_point: np.ndarray
    terminal_status: str
    n_iters: int


def ascent_direction(obj: Objective, x, grad_floor: float = 1e-12) -> Optional[np.ndarray]:
    """Unit ascent direction u(x), or None where |grad f| < grad_floor."""
    g = obj.grad_fn(as_point(x, obj.dim))
    gn = float(np.linalg.norm(g))
    if gn < grad_floor:
        return None
    return g / gn


def sam_value(obj: Objective, x, rho: float, grad_floor: float = 1e-12) -> float:
    """f(x + rho*u(x)); undefined at critical points of f."""
    x = as_point(x, obj.dim)
    u = ascent_direction(obj, x, grad_floor)
    if u is None:
        raise DegenerateGradientError("SAM objective undefined at critical point")
    return float(obj.value_fn(x + rho * u))


def shifted_gradient(obj: Objective, x, rho: float, grad_floor: float = 1e-12) -> np.ndarray:
    """grad f(x + rho*u(x)), the update direction actually used by SAM."""
    x = as_point(x, obj.dim)
    u = ascent_direction(obj, x, grad_floor)
    if u is None:
        raise DegenerateGradientError("shifted gradient undefined at critical point")
    return np.asarray(obj.grad_fn(x + rho * u), dtype=np.float64)


def direction_jacobian(obj: Objective, x, grad_floor: float = 1e-12) -> np.ndarray:
    """Jacobian of u(x) = grad f/|grad f|: (I - u u') H / |grad f|."""
    from .landscape import hessian

    x = as_point(x, obj.dim)
    g = np.asarray(obj.grad_fn(x), dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn < grad_floor:
        raise DegenerateGradientError("direction Jacobian undefined at critical point")
    u = g / gn
    h = hessian(obj, x)
    return (h - np.outer(u, u @ h)) / gn


def sam_exact_gradient(obj: Objective, x, rho: float, grad_floor: float = 1e-12) -> np.ndarray:
    """Exact gradient of the SAM objective: (I + rho * Du(x))' grad f(x+rho u)."""
    x = as_point(x, obj.dim)
    g = np.asarray(obj.grad_fn(x), dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn < grad_floor:
        raise DegenerateGradientError("exact SAM gradient undefined at critical point")
    u = g / gn
    sg = np.asarray(obj.grad_fn(x + rho * u), dtype=np.float64)
    du = direction_jacobian(obj, x, grad_floor)
    return sg + rho * (du.T @ sg)


def run(obj: Objective, cfg: SamConfig, x0, record_every: int = 1) -> Trajectory:
    """Drive the GD/SAM/switch iteration from x0.

    Records (k, f, |grad f|, |shifted grad|) every record_every steps plus the
    terminal state. Stops on the phase's convergence check, on a degenerate
    ascent direction (grad_floor_hit), or when the budget runs out. A
    non-finite iterate raises DivergenceError carrying the last finite state.
    """
    if record_every < 1:
        raise ValueError("record_every must be positive")
    x0 = as_point(x0, obj.dim)
    fused = _fused_runner(obj, cfg)
    if fused is not None:
        return fused(obj, cfg, x0, record_every)
    return _run_generic(obj, cfg, x0, record_every)


def _fused_runner(obj, cfg):
    if obj.kernel is None:
        return None
    kind = obj.kernel[0]
    if isinstance(kind, (int, np.integer)):
        if kernels.run_builtin_loop() is None:
            return None
        return _run_fused_builtin
    if kind == "mlp":
        if kernels.run_mlp_loop() is None:
            return None
        return _run_fused_mlp
    return None


def _run_fused_builtin(obj, cfg, x0, record_every):
    out = kernels.run_builtin_loop()(
        int(obj.kernel[0]),
        np.ascontiguousarray(obj.kernel[1], dtype=np.float64),
        np.ascontiguousarray(x0),
        cfg.gd_steps(),
        cfg.rho,
        cfg.eta,
        cfg.max_iters,
        cfg.grad_floor,
        cfg.converge_tol,
        record_every,
    )
    return _trajectory_from_arrays(obj, cfg, *out)


def _run_fused_mlp(obj, cfg, x0, record_every, momentum=0.0):
    _, (x, labels, n_in, n_hidden, n_classes) = obj.kernel
    out = kernels.run_mlp_loop()(
        np.ascontiguousarray(x0),
        x,
        labels,
        n_in,
        n_hidden,
        n_classes,
        cfg.gd_steps(),
        cfg.rho,
        cfg.eta,
        cfg.max_iters,
        cfg.grad_floor,
        cfg.converge_tol,
        record_every,
        momentum,
    )
    return _trajectory_from_arrays(obj, cfg, *out)


def _trajectory_from_arrays(obj, cfg, ks, fs, gns, sgns, pts, terminal, status, n_iters):
    traj = Trajectory(
        ks=ks,
        fs=fs,
        grad_norms=gns,
        shifted_grad_norms=sgns,
        points=pts,
        terminal_point=terminal,
        terminal_status=kernels.STATUS_NAMES.get(status, "diverged"),
        n_iters=int(n_iters),
    )
    if status == kernels.STATUS_DIVERGED:
        raise DivergenceError(
            f"iterate exceeded {DIVERGENCE_LIMIT:g} after {n_iters} steps", traj
        )
    return traj


def _run_generic(obj, cfg, x0, record_every, momentum=0.0):
    value, grad = obj.value_fn, obj.grad_fn
    rho, eta = cfg.rho, cfg.eta
    gd_steps = cfg.gd_steps()
    x = x0.copy()
    velocity = np.zeros_like(x) if momentum > 0.0 else None
    rec_k, rec_f, rec_g, rec_s, rec_x = [], [], [], [], []

    def shifted_norm_for_record(xc, g, gn):
        if rho == 0.0:
            return gn
        if gn < cfg.grad_floor:
            return math.nan
        return float(np.linalg.norm(grad(xc + rho * (g / gn))))

    def record(k, xc, gn, sgn):
        rec_k.append(k)
        rec_f.append(float(value(xc)))
        rec_g.append(gn)
        rec_s.append(sgn)
        rec_x.append(xc.copy())

    status = None
    k_term = cfg.max_iters
    n_iters = cfg.max_iters
    for k in range(cfg.max_iters):
        g = np.asarray(grad(x), dtype=np.float64)
        gn = float(np.linalg.norm(g))
        if k < gd_steps:
            if k % record_every == 0:
                record(k, x, gn, shifted_norm_for_record(x, g, gn))
            if gn < cfg.converge_tol:
                status, k_term, n_iters = kernels.STATUS_CONVERGED_RAW, k, k
                break
            step_dir = g
        else:
            if gn < cfg.grad_floor:
                if k % record_every == 0:
                    record(k, x, gn, math.nan)
                status, k_term, n_iters = kernels.STATUS_GRAD_FLOOR, k, k
                break
            sg = np.asarray(grad(x + rho * (g / gn)), dtype=np.float64)
            sgn = float(np.linalg.norm(sg))
            if k % record_every == 0:
                record(k, x, gn, sgn)
            if sgn < cfg.converge_tol:
                status, k_term, n_iters = kernels.STATUS_CONVERGED_SHIFTED, k, k
                break
            if gn < cfg.converge_tol:
                status, k_term, n_iters = kernels.STATUS_CONVERGED_RAW, k, k
                break
            step_dir = sg
        if velocity is not None:
            velocity = momentum * velocity + step_dir
            step_dir = velocity
        x_new = x - eta * step_dir
        if not np.all(np.isfinite(x_new)) or np.any(np.abs(x_new) > DIVERGENCE_LIMIT):
            status, k_term, n_iters = kernels.STATUS_DIVERGED, k, k
            break
        x = x_new
    else:
        status = kernels.STATUS_BUDGET

    if not rec_k or rec_k[-1] != k_term:
        g = np.asarray(grad(x), dtype=np.float64)
        gn = float(np.linalg.norm(g))
        record(k_term, x, gn, shifted_norm_for_record(x, g, gn))

    return _trajectory_from_arrays(
        obj,
        cfg,
        np.asarray(rec_k, dtype=np.int64),
        np.asarray(rec_f),
        np.asarray(rec_g),
        np.asarray(rec_s),
        np.asarray(rec_x),
        x.copy(),
        status,
        n_iters,
    )


# ---------------------------------------------------------------------------
# serialization: CSV of records plus a JSON sidecar with the terminal state


def trajectory_to_csv(traj: Trajectory, path) -> None:
    rows = zip(traj.ks, traj.fs, traj.grad_norms, traj.shifted_grad_norms)
    lines = ["k,f,grad_norm,shifted_grad_norm"]
    lines.extend(
        f"{int(k)},{fmt(f)},{fmt(g)},{fmt(s)}" for k, f, g, s in rows
    )
    atomic_write_text(path, "\n".join(lines) + "\n")


def trajectory_sidecar(traj: Trajectory) -> dict:
    return {
        "terminal_point": [float(v) for v in traj.terminal_point],
        "terminal_status": traj.terminal_status,
        "n_iters": traj.n_iters,
    }


def trajectory_to_json(traj: Trajectory, path) -> None:
    atomic_write_json(path, trajectory_sidecar(traj))
