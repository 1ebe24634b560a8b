"""Analytic test landscapes with exact gradients.

Every builtin ships its own closed-form value and gradient. Hessians are
analytic where the function is C^2 everywhere; the 2-d synthetic landscape is
only piecewise C^2 (its windows are cosine-smoothed C^1 splices), so it relies
on the symmetrized central-difference fallback of :func:`hessian`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# step scaling for central differences: h = max(1, |x|) * eps^(1/3)
FD_STEP = float(np.finfo(np.float64).eps) ** (1.0 / 3.0)

# kind ids shared with the loop backends (compiled and pure)
KIND_QUARTIC1D = 0
KIND_DOUBLE_WELL1D = 1
KIND_QUADRATIC = 2
KIND_SYNTHETIC2D = 3

BUILTIN_NAMES = ("synthetic2d", "quartic1d", "quadratic", "double_well1d")


class LandscapeError(ValueError):
    """Malformed builtin parameters or invalid evaluation input."""


@dataclass(frozen=True)
class Objective:
    """A differentiable scalar field.

    ``value_fn`` and ``grad_fn`` are pure: the same input yields bit-identical
    output. ``hessian_fn`` may be None, in which case :func:`hessian` falls
    back to central differences of the gradient. ``kernel`` is an optional
    handle (kind id, packed params) understood by the fused loop backends.
    """

    dim: int
    value_fn: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    hessian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    kernel: Optional[tuple] = None
    default_box: Optional[np.ndarray] = None


def as_point(x, dim=None) -> np.ndarray:
    """Validate and normalize a point: finite float64 vector of length dim."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1:
        raise LandscapeError(f"point must be a vector, got shape {p.shape}")
    if dim is not None and p.size != dim:
        raise LandscapeError(f"dimension mismatch: point has {p.size}, objective has {dim}")
    if not np.all(np.isfinite(p)):
        raise LandscapeError("non-finite point")
    return p


def evaluate(obj: Objective, x) -> float:
    return float(obj.value_fn(as_point(x, obj.dim)))


def gradient(obj: Objective, x) -> np.ndarray:
    g = np.asarray(obj.grad_fn(as_point(x, obj.dim)), dtype=np.float64)
    if g.shape != (obj.dim,):
        raise LandscapeError(f"gradient has shape {g.shape}, expected ({obj.dim},)")
    return g


def hessian(obj: Objective, x) -> np.ndarray:
    """Analytic Hessian when available, else symmetrized central differences."""
    p = as_point(x, obj.dim)
    if obj.hessian_fn is not None:
        h = np.asarray(obj.hessian_fn(p), dtype=np.float64)
    else:
        h = np.empty((obj.dim, obj.dim))
        step = max(1.0, float(np.linalg.norm(p))) * FD_STEP
        for j in range(obj.dim):
            e = np.zeros(obj.dim)
            e[j] = step
            h[:, j] = (obj.grad_fn(p + e) - obj.grad_fn(p - e)) / (2.0 * step)
    return 0.5 * (h + h.T)


# ---------------------------------------------------------------------------
# builtins


def _quartic1d_value(x):
    t = x[0]
    return (t * (t - 2.0)) ** 2


def _quartic1d_grad(x):
    t = x[0]
    return np.array([4.0 * t * (t - 1.0) * (t - 2.0)])


def _quartic1d_hess(x):
    t = x[0]
    return np.array([[12.0 * t * t - 24.0 * t + 8.0]])


def _double_well_value(a):
    def f(x):
        t = x[0]
        return (t * t - a * a) ** 2

    return f


def _double_well_grad(a):
    def g(x):
        t = x[0]
        return np.array([4.0 * t * (t * t - a * a)])

    return g


def _double_well_hess(a):
    def h(x):
        t = x[0]
        return np.array([[12.0 * t * t - 4.0 * a * a]])

    return h


# two-dimensional synthetic landscape: a Gaussian bump windowed to x >= -1
# minus a curved trench along x = -1.55 cos(y/1.5), windowed in |y|

def _wx(x):
    if x <= -1.0:
        return 0.0
    if x >= 0.0:
        return 1.0
    return 0.5 * (1.0 - math.cos(math.pi * (x + 1.0)))


def _wx_d(x):
    if -1.0 < x < 0.0:
        return 0.5 * math.pi * math.sin(math.pi * (x + 1.0))
    return 0.0


def _wy(y):
    a = abs(y)
    if a <= 0.6:
        return 1.0
    if a >= 5.6:
        return 0.0
    return 0.5 * (1.0 + math.cos(math.pi * (a - 0.6) / 5.0))


def _wy_d(y):
    a = abs(y)
    if 0.6 < a < 5.6:
        return -0.1 * math.pi * math.sin(math.pi * (a - 0.6) / 5.0) * math.copysign(1.0, y)
    return 0.0


def _synthetic2d_value(p):
    x, y = p[0], p[1]
    e1 = math.exp(-(x * x + y * y) / 6.25)
    s = x + 1.55 * math.cos(y / 1.5)
    e2 = math.exp(-s * s)
    return 0.8 * e1 * _wx(x) - e2 * _wy(y) + 1.0


def _synthetic2d_grad(p):
    x, y = p[0], p[1]
    e1 = math.exp(-(x * x + y * y) / 6.25)
    wx, wxd = _wx(x), _wx_d(x)
    s = x + 1.55 * math.cos(y / 1.5)
    e2 = math.exp(-s * s)
    wy, wyd = _wy(y), _wy_d(y)
    ds_dy = -1.55 * math.sin(y / 1.5) / 1.5
    gx = 0.8 * e1 * (wxd - (2.0 * x / 6.25) * wx) + 2.0 * s * e2 * wy
    gy = 0.8 * e1 * (-(2.0 * y / 6.25)) * wx + 2.0 * s * e2 * ds_dy * wy - e2 * wyd
    return np.array([gx, gy])


def minimizer_curve(n: int, lo: float = -0.6, hi: float = 0.6) -> np.ndarray:
    """Sample the global minimizer curve of synthetic2d: x = -1.55 cos(y/1.5)."""
    ys = np.linspace(lo, hi, n)
    return np.column_stack([-1.55 * np.cos(ys / 1.5), ys])


def distance_to_minimizer_curve(
    pts: np.ndarray, samples: int = 4001, lo: float = -0.6, hi: float = 0.6
) -> np.ndarray:
    """Euclidean distance from each point to the synthetic2d minimizer curve.

    The default span is the global-minimizer segment |y| <= 0.6; a wider span
    measures distance to the valley-floor locus x = -1.55 cos(y/1.5), which
    continues past the segment while the trench window stays positive.
    """
    curve = minimizer_curve(samples, lo, hi)
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    d = np.empty(pts.shape[0])
    for i, p in enumerate(pts):
        d[i] = np.sqrt(((curve - p) ** 2).sum(axis=1).min())
    return d


def make_builtin(name: str, **params) -> Objective:
    """Construct a builtin objective by name.

    quartic1d       f(x) = x^2 (x-2)^2, no parameters
    double_well1d   f(x) = (x^2 - a^2)^2, parameter half_width a > 0 (default 1)
    quadratic       f(x) = x'Ax/2 + b'x, A symmetric positive semidefinite
    synthetic2d     the 2-d curved-trench landscape, no parameters
    """
    if name == "quartic1d":
        _reject_params(name, params)
        return Objective(
            dim=1,
            value_fn=_quartic1d_value,
            grad_fn=_quartic1d_grad,
            hessian_fn=_quartic1d_hess,
            name="quartic1d",
            kernel=(KIND_QUARTIC1D, np.zeros(0)),
            default_box=np.array([[-1.0, 3.0]]),
        )
    if name == "double_well1d":
        a = float(params.pop("half_width", 1.0))
        _reject_params(name, params)
        if a <= 0:
            raise LandscapeError("double_well1d: half_width must be positive")
        return Objective(
            dim=1,
            value_fn=_double_well_value(a),
            grad_fn=_double_well_grad(a),
            hessian_fn=_double_well_hess(a),
            name=f"double_well1d(a={a})",
            kernel=(KIND_DOUBLE_WELL1D, np.array([a])),
            default_box=np.array([[-2.0 * a, 2.0 * a]]),
        )
    if name == "quadratic":
        if "A" not in params:
            raise LandscapeError("quadratic: parameter A is required")
        A = np.asarray(params.pop("A"), dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise LandscapeError("quadratic: A must be a square matrix")
        d = A.shape[0]
        b = np.asarray(params.pop("b", np.zeros(d)), dtype=np.float64)
        _reject_params(name, params)
        if b.shape != (d,):
            raise LandscapeError("quadratic: b has wrong length")
        if not np.allclose(A, A.T, atol=1e-12, rtol=0.0):
            raise LandscapeError("quadratic: A must be symmetric")
        if np.linalg.eigvalsh(A).min() < -1e-10:
            raise LandscapeError("quadratic: A must be positive semidefinite")
        A = 0.5 * (A + A.T)

        def value(x, A=A, b=b):
            return 0.5 * float(x @ A @ x) + float(b @ x)

        def grad(x, A=A, b=b):
            return A @ x + b

        def hess(x, A=A):
            return A.copy()

        return Objective(
            dim=d,
            value_fn=value,
            grad_fn=grad,
            hessian_fn=hess,
            name=f"quadratic(dim={d})",
            kernel=(KIND_QUADRATIC, np.concatenate([A.ravel(), b])),
            default_box=np.tile([-5.0, 5.0], (d, 1)),
        )
    if name == "synthetic2d":
        _reject_params(name, params)
        return Objective(
            dim=2,
            value_fn=_synthetic2d_value,
            grad_fn=_synthetic2d_grad,
            hessian_fn=None,
            name="synthetic2d",
            kernel=(KIND_SYNTHETIC2D, np.zeros(0)),
            default_box=np.array([[-6.0, 6.0], [-6.0, 6.0]]),
        )
    raise LandscapeError(f"unknown builtin {name!r}; expected one of {BUILTIN_NAMES}")


def _reject_params(name, params):
    if params:
        raise LandscapeError(f"{name}: unexpected parameters {sorted(params)}")


def batch_value_grad(obj: Objective, pts: np.ndarray):
    """Values and gradients at an (n, dim) array of points.

    Uses the active loop backend for kernel-backed objectives, else falls back
    to a per-point loop over the closures.
    """
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != obj.dim:
        raise LandscapeError(f"expected (n, {obj.dim}) array, got {pts.shape}")
    if obj.kernel is not None and isinstance(obj.kernel[0], (int, np.integer)):
        from . import kernels

        return kernels.batch_value_grad(obj.kernel[0], obj.kernel[1], pts)
    vals = np.empty(pts.shape[0])
    grads = np.empty_like(pts)
    for i in range(pts.shape[0]):
        vals[i] = obj.value_fn(pts[i])
        grads[i] = obj.grad_fn(pts[i])
    return vals, grads
