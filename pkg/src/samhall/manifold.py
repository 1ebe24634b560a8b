"""Tracing the hallucinated-minimizer set along a minimizer curve.

Solves y + rho u(y) = x for y by Newton iteration with Jacobian
I + rho Du(y), warm-starting each target from the previous preimage. Where the
target runs along the true-minimizer set, every preimage is SAM-stationary.
Nonsingularity of the Jacobian is the standing assumption; near-singularity is
reported (and the walk truncated) rather than masked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._io import atomic_write_text, fmt
from .landscape import Objective, as_point
from .sam_core import DegenerateGradientError, direction_jacobian

SINGULARITY_THRESHOLD = 1e-12
MAX_SEGMENT_REFINEMENTS = 4


class NewtonError(RuntimeError):
    pass


class SingularJacobianError(NewtonError):
    pass


@dataclass
class ContinuationResult:
    ts: np.ndarray
    targets: np.ndarray
    preimages: np.ndarray
    residuals: np.ndarray                 # |shifted gradient| at each preimage
    jacobian_min_singular: np.ndarray

    def __len__(self):
        return len(self.ts)

    def to_csv(self, path) -> None:
        dim = self.targets.shape[1] if len(self.targets) else 0
        cols = ["t"]
        cols += [f"target{k}" for k in range(dim)]
        cols += [f"preimage{k}" for k in range(dim)]
        cols += ["residual", "min_singular"]
        lines = [",".join(cols)]
        for i in range(len(self.ts)):
            row = [fmt(self.ts[i])]
            row += [fmt(v) for v in self.targets[i]]
            row += [fmt(v) for v in self.preimages[i]]
            row += [fmt(self.residuals[i]), fmt(self.jacobian_min_singular[i])]
            lines.append(",".join(row))
        atomic_write_text(path, "\n".join(lines) + "\n")


def _newton_state(obj, y, rho, grad_floor):
    g = np.asarray(obj.grad_fn(y), dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn < grad_floor:
        raise DegenerateGradientError("Newton iterate hit a critical point of f")
    u = g / gn
    return u, gn


def newton_solve_preimage(
    obj: Objective,
    x_target,
    rho: float,
    y0,
    newton_tol: float = 1e-10,
    max_newton: int = 50,
    grad_floor: float = 1e-12,
) -> np.ndarray:
    """Solve F(y) = y + rho u(y) - x_target = 0 with Jacobian I + rho Du(y)."""
    x_target = as_point(x_target, obj.dim)
    y = as_point(y0, obj.dim).copy()
    eye = np.eye(obj.dim)
    for _ in range(max_newton):
        u, _ = _newton_state(obj, y, rho, grad_floor)
        res = y + rho * u - x_target
        if float(np.linalg.norm(res)) < newton_tol:
            return _newton_polish(obj, y, res, rho, eye, grad_floor)
        jac = eye + rho * direction_jacobian(obj, y, grad_floor)
        smin = float(np.linalg.svd(jac, compute_uv=False)[-1])
        if smin < SINGULARITY_THRESHOLD:
            raise SingularJacobianError(
                f"I + rho Du is singular within {SINGULARITY_THRESHOLD:g} (smin={smin:.3e})"
            )
        y = y + np.linalg.solve(jac, -res)
    raise NewtonError(f"no convergence in {max_newton} Newton steps (no preimage?)")


def _newton_polish(obj, y, res, rho, eye, grad_floor):
    # one extra correction once inside the tolerance; quadratic convergence
    # pushes the residual to machine level, which keeps reported shifted
    # gradients comfortably inside the tolerance as well
    try:
        jac = eye + rho * direction_jacobian(obj, y, grad_floor)
        if float(np.linalg.svd(jac, compute_uv=False)[-1]) < SINGULARITY_THRESHOLD:
            return y
        return y + np.linalg.solve(jac, -res)
    except (DegenerateGradientError, np.linalg.LinAlgError):
        return y


def continue_manifold(
    obj: Objective,
    x_h,
    rho: float,
    curve,
    max_step: float,
    newton_tol: float = 1e-10,
    max_newton: int = 50,
    grad_floor: float = 1e-12,
    ts=None,
) -> ContinuationResult:
    """Walk the curve samples in order, warm-starting from the last preimage.

    The first curve sample must coincide with x_star = x_h + rho u(x_h) within
    1e-6. Consecutive preimages farther apart than max_step trigger chord
    subdivision of the segment (unreported stepping stones, up to 4 halvings);
    the walk truncates at the first unresolved failure.
    """
    x_h = as_point(x_h, obj.dim)
    curve = np.atleast_2d(np.asarray(curve, dtype=np.float64))
    if curve.shape[1] != obj.dim:
        raise ValueError("curve points have wrong dimension")
    if ts is None:
        ts = np.arange(len(curve), dtype=np.float64)
    u, _ = _newton_state(obj, x_h, rho, grad_floor)
    x_star = x_h + rho * u
    if float(np.linalg.norm(curve[0] - x_star)) > 1e-6:
        raise ValueError("first curve point must equal x_h + rho u(x_h) within 1e-6")

    kept_t, kept_target, kept_y = [], [], []
    kept_res, kept_smin = [], []
    y_prev = x_h
    eye = np.eye(obj.dim)
    for i, target in enumerate(curve):
        y = _solve_segment(
            obj, y_prev, curve[i - 1] if i else x_star, target, rho, max_step,
            newton_tol, max_newton, grad_floor, depth=0,
        )
        if y is None:
            break
        u_y, _ = _newton_state(obj, y, rho, grad_floor)
        shifted = np.asarray(obj.grad_fn(y + rho * u_y), dtype=np.float64)
        residual = float(np.linalg.norm(shifted))
        if residual >= newton_tol:
            break
        jac = eye + rho * direction_jacobian(obj, y, grad_floor)
        smin = float(np.linalg.svd(jac, compute_uv=False)[-1])
        if smin < SINGULARITY_THRESHOLD:
            break
        kept_t.append(float(ts[i]))
        kept_target.append(target)
        kept_y.append(y)
        kept_res.append(residual)
        kept_smin.append(smin)
        y_prev = y

    return ContinuationResult(
        ts=np.asarray(kept_t),
        targets=np.asarray(kept_target).reshape(-1, obj.dim),
        preimages=np.asarray(kept_y).reshape(-1, obj.dim),
        residuals=np.asarray(kept_res),
        jacobian_min_singular=np.asarray(kept_smin),
    )


def _solve_segment(obj, y_from, x_from, x_to, rho, max_step, newton_tol,
                   max_newton, grad_floor, depth):
    try:
        y = newton_solve_preimage(obj, x_to, rho, y_from, newton_tol, max_newton, grad_floor)
    except (NewtonError, DegenerateGradientError):
        y = None
    if y is not None and float(np.linalg.norm(y - y_from)) <= max_step:
        return y
    if depth >= MAX_SEGMENT_REFINEMENTS:
        return None
    x_mid = 0.5 * (np.asarray(x_from) + np.asarray(x_to))
    y_mid = _solve_segment(obj, y_from, x_from, x_mid, rho, max_step,
                           newton_tol, max_newton, grad_floor, depth + 1)
    if y_mid is None:
        return None
    return _solve_segment(obj, y_mid, x_mid, x_to, rho, max_step,
                          newton_tol, max_newton, grad_floor, depth + 1)
