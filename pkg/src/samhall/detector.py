"""Classification of converged points and attractor-condition diagnostics.

A converged point is a true stationary point of f, a hallucinated minimizer
(SAM-stationary, locally minimal for the SAM objective, but with a
non-vanishing raw gradient), a hallucinated stationary non-minimum, or not
stationary at all. Local minimality is certified by sphere probes of the SAM
objective rather than by eigenvalues of a numerical SAM Hessian: the SAM
objective is only C^1 in general, so second-order tests are unreliable while
probes test the definition directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._io import atomic_write_json
from .landscape import Objective, as_point, hessian
from .sam_core import (
    DegenerateGradientError,
    ascent_direction,
    direction_jacobian,
    sam_value,
)

PROBE_SLACK = 1e-12
DENSE_HESSIAN_MAX_DIM = 64

TRUE_STATIONARY = "true_stationary"
HALLUCINATED_MINIMIZER = "hallucinated_minimizer"
HALLUCINATED_NONMIN = "hallucinated_stationary_nonmin"
NOT_STATIONARY = "not_stationary"


class AttractorConditionError(RuntimeError):
    """The attractor margin was non-positive on the sampled neighborhood."""


@dataclass
class StationaryReport:
    point: np.ndarray
    rho: float
    raw_grad_norm: float
    shifted_grad_norm: float
    classification: str
    local_min_evidence: dict
    attractor_margin: Optional[float]
    probe_inconclusive: bool = False

    def to_dict(self):
        return {
            "point": [float(v) for v in self.point],
            "rho": self.rho,
            "raw_grad_norm": self.raw_grad_norm,
            "shifted_grad_norm": _jsonable(self.shifted_grad_norm),
            "classification": self.classification,
            "local_min_evidence": self.local_min_evidence,
            "attractor_margin": _jsonable(self.attractor_margin),
            "probe_inconclusive": self.probe_inconclusive,
        }


@dataclass
class LagrangeReport:
    residual: np.ndarray
    residual_norm: float
    lam: float
    alignment: float

    def to_dict(self):
        return {
            "residual": [float(v) for v in self.residual],
            "residual_norm": self.residual_norm,
            "lambda": self.lam,
            "alignment": self.alignment,
        }


@dataclass
class StepSizeBoundReport:
    delta: float
    M: float
    L: float
    gamma: float
    eta_max: float

    def to_dict(self):
        return {
            "delta": self.delta,
            "M": self.M,
            "L": self.L,
            "gamma": self.gamma,
            "eta_max": self.eta_max,
        }


def _jsonable(v):
    if v is None:
        return None
    v = float(v)
    return None if math.isnan(v) else v


def report_to_json(report, path) -> None:
    atomic_write_json(path, report.to_dict())


def sphere_points(dim: int, count: int, radius: float, rng) -> np.ndarray:
    """Seeded quasi-uniform points on the sphere (normalized Gaussians)."""
    pts = rng.standard_normal((count, dim))
    norms = np.linalg.norm(pts, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return radius * pts / norms


def classify(
    obj: Objective,
    x,
    rho: float,
    sam_tol: float = 1e-8,
    raw_thresh: float = 1e-4,
    probe_radius: float = 1e-3,
    probe_count: int = 32,
    seed: int = 0,
    grad_floor: float = 1e-12,
) -> StationaryReport:
    """Classify a converged point at perturbation radius rho.

    raw_thresh separates "the raw gradient still vanishes" from "it does not";
    it is a parameter, not ground truth, and defaults to a value orders of
    magnitude above typical converged shifted-gradient norms.
    """
    x = as_point(x, obj.dim)
    g = np.asarray(obj.grad_fn(x), dtype=np.float64)
    raw = float(np.linalg.norm(g))

    if raw >= grad_floor:
        u = g / raw
        shifted = float(np.linalg.norm(obj.grad_fn(x + rho * u)))
    else:
        shifted = math.nan

    evidence = {"probe_count": 0, "min_probe_increase": math.nan}
    inconclusive = False

    if raw < raw_thresh:
        classification = TRUE_STATIONARY
    elif shifted > sam_tol:
        classification = NOT_STATIONARY
    else:
        center_val = sam_value(obj, x, rho, grad_floor)
        rng = np.random.default_rng(seed)
        probes = sphere_points(obj.dim, probe_count, probe_radius, rng)
        increases = []
        degenerate = 0
        for p in probes:
            try:
                increases.append(sam_value(obj, x + p, rho, grad_floor) - center_val)
            except DegenerateGradientError:
                degenerate += 1
        evidence = {
            "probe_count": len(increases),
            "min_probe_increase": min(increases) if increases else math.nan,
        }
        if degenerate > probe_count // 2:
            classification = HALLUCINATED_NONMIN
            inconclusive = True
        elif increases and min(increases) >= -PROBE_SLACK:
            classification = HALLUCINATED_MINIMIZER
        else:
            classification = HALLUCINATED_NONMIN

    margin = None
    if classification != NOT_STATIONARY and raw >= grad_floor:
        margin = attractor_margin(obj, x, rho, grad_floor=grad_floor)

    return StationaryReport(
        point=x,
        rho=float(rho),
        raw_grad_norm=raw,
        shifted_grad_norm=shifted,
        classification=classification,
        local_min_evidence=evidence,
        attractor_margin=margin,
        probe_inconclusive=inconclusive,
    )


def attractor_margin(obj: Objective, x, rho: float, grad_floor: float = 1e-12) -> float:
    """gamma(x) = 1 + rho * lambda_min(Sym(Du(x))).

    Positivity is the sufficient condition for local convergence of the SAM
    iteration to the hallucinated set. Small dimensions (or objectives with an
    analytic Hessian) use a dense symmetric eigensolve; large
    finite-difference-only objectives use Hessian-vector products and an
    inverse-free extremal eigenvalue iteration (Lanczos, 1e-4 relative
    tolerance, sufficient for the sign test).
    """
    x = as_point(x, obj.dim)
    if obj.hessian_fn is not None or obj.dim <= DENSE_HESSIAN_MAX_DIM:
        du = direction_jacobian(obj, x, grad_floor)
        sym = 0.5 * (du + du.T)
        lam_min = float(np.linalg.eigvalsh(sym)[0])
    else:
        lam_min = _lambda_min_matfree(obj, x, grad_floor)
    return 1.0 + rho * lam_min


def _lambda_min_matfree(obj, x, grad_floor, tol=1e-4, seed=0):
    """lambda_min of Sym(Du) via central-difference Hessian-vector products."""
    from .landscape import FD_STEP

    g = np.asarray(obj.grad_fn(x), dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn < grad_floor:
        raise DegenerateGradientError("attractor margin undefined at critical point")
    u = g / gn
    h = max(1.0, float(np.linalg.norm(x))) * FD_STEP

    def hvp(v):
        vn = float(np.linalg.norm(v))
        if vn == 0.0:
            return np.zeros_like(v)
        d = v / vn
        return (obj.grad_fn(x + h * d) - obj.grad_fn(x - h * d)) * (vn / (2.0 * h))

    def sym_mv(v):
        v = np.asarray(v, dtype=np.float64).ravel()
        # Du v = (I - uu') H v / |g|; Du' v = H (I - uu') v / |g|
        hv = hvp(v)
        left = hv - u * (u @ hv)
        right = hvp(v - u * (u @ v))
        return (left + right) / (2.0 * gn)

    d = obj.dim
    try:
        from scipy.sparse.linalg import LinearOperator, eigsh

        op = LinearOperator((d, d), matvec=sym_mv, dtype=np.float64)
        vals = eigsh(op, k=1, which="SA", tol=tol, maxiter=max(200, 10 * d),
                     v0=np.random.default_rng(seed).standard_normal(d),
                     return_eigenvectors=False)
        return float(vals[0])
    except Exception:
        return _lambda_min_power(sym_mv, d, tol, seed)


def _lambda_min_power(mv, d, tol, seed, iters=500):
    # largest |eigenvalue| first, then shifted power iteration for the smallest
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    lam_big = 0.0
    for _ in range(iters):
        w = mv(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam_big) <= tol * max(1.0, abs(lam_new)):
            lam_big = lam_new
            break
        lam_big = lam_new
    shift = abs(lam_big) * 1.5 + 1e-12
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = shift * v - mv(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return shift - lam


def lagrange_check(obj: Objective, x_h, x_star, grad_floor: float = 1e-12) -> LagrangeReport:
    """Check the first-order geometry x_star = x_h + rho * u(x_h).

    rho is taken to be |x_h - x_star|; lambda = 2 rho / |grad f(x_h)| is the
    multiplier of the constrained-extremum condition and alignment is
    <x_star - x_h, grad f(x_h)> (positive when the gradient points at x_star).
    """
    x_h = as_point(x_h, obj.dim)
    x_star = as_point(x_star, obj.dim)
    g = np.asarray(obj.grad_fn(x_h), dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn < grad_floor:
        raise DegenerateGradientError("Lagrange check undefined at critical point")
    rho = float(np.linalg.norm(x_h - x_star))
    residual = x_star - (x_h + rho * (g / gn))
    return LagrangeReport(
        residual=residual,
        residual_norm=float(np.linalg.norm(residual)),
        lam=2.0 * rho / gn,
        alignment=float((x_star - x_h) @ g),
    )


def step_size_bound(
    obj: Objective,
    x_h,
    rho: float,
    delta: float,
    sample_resolution: int = 33,
    grad_floor: float = 1e-12,
    seed: int = 0,
) -> StepSizeBoundReport:
    """Sampled constants of the local-convergence step-size bound.

    M bounds |grad f| over the rho-inflated neighborhood, L bounds the Hessian
    spectral norm and gamma the attractor margin over the delta-neighborhood;
    eta_max = min(delta / (2M), 2 gamma / L). Constants come from conservative
    dense sampling (a grid for dim <= 2, seeded ball sampling otherwise), which
    is reproducible and sufficient for a diagnostic.
    """
    x_h = as_point(x_h, obj.dim)
    if delta <= 0:
        raise ValueError("delta must be positive (empty neighborhood rejected)")
    if sample_resolution < 2:
        raise ValueError("sample_resolution must be at least 2")

    outer = _neighborhood_samples(x_h, delta + rho, sample_resolution, obj.dim, seed)
    inner = _neighborhood_samples(x_h, delta, sample_resolution, obj.dim, seed + 1)

    big_m = 0.0
    for p in outer:
        big_m = max(big_m, float(np.linalg.norm(obj.grad_fn(p))))

    big_l = 0.0
    gamma = math.inf
    for p in inner:
        big_l = max(big_l, float(np.linalg.norm(hessian(obj, p), 2)))
        if ascent_direction(obj, p, grad_floor) is None:
            continue
        gamma = min(gamma, attractor_margin(obj, p, rho, grad_floor))
    if not math.isfinite(gamma):
        raise AttractorConditionError("no non-degenerate samples in the neighborhood")
    if gamma <= 0.0:
        raise AttractorConditionError(
            f"attractor condition violated: gamma = {gamma:.3e} on sampled neighborhood"
        )
    if big_m <= 0.0 or big_l <= 0.0:
        raise ValueError("degenerate neighborhood: M and L must be positive")

    return StepSizeBoundReport(
        delta=float(delta),
        M=big_m,
        L=big_l,
        gamma=float(gamma),
        eta_max=min(delta / (2.0 * big_m), 2.0 * gamma / big_l),
    )


def _neighborhood_samples(center, radius, resolution, dim, seed):
    if dim == 1:
        offs = np.linspace(-radius, radius, resolution)[:, None]
    elif dim == 2:
        axis = np.linspace(-radius, radius, resolution)
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        offs = np.column_stack([gx.ravel(), gy.ravel()])
        offs = offs[np.linalg.norm(offs, axis=1) <= radius]
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((resolution, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = radius * rng.uniform(0.0, 1.0, resolution) ** (1.0 / dim)
        offs = dirs * radii[:, None]
        offs = np.vstack([offs, np.zeros(dim)])
    return center + offs
