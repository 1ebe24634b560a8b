"""Desk-scale neural-network objective and plane-slice visualization.

A two-layer tanh classifier with mean cross-entropy over a seeded synthetic
dataset, exposed through the common objective contract (value + backprop
gradient, no analytic Hessian). Full-batch gradients keep the objective smooth
and the dynamics deterministic; reductions run in a fixed sample order, so the
same seed always reproduces the same run bit for bit on a given backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._io import atomic_write_text, fmt
from ._pyloops import mlp_probs
from .landscape import Objective, as_point
from .sam_core import (
    SamConfig,
    Trajectory,
    _run_fused_mlp,
    _run_generic,
    ascent_direction,
)

DATASET_KINDS = ("gaussians", "rings")


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dim: int
    class_count: int
    init_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.class_count) < 1:
            raise ValueError("dims must be positive")

    @property
    def param_count(self) -> int:
        return self.hidden_dim * (self.input_dim + 1) + self.class_count * (self.hidden_dim + 1)


@dataclass(frozen=True)
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    name: str
    seed: int

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ValueError("inputs must be a non-empty (N, d) matrix")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError("labels must align with inputs")


def make_dataset(kind: str, n_per_class: int, class_count: int, noise: float, seed: int) -> LabeledDataset:
    """Seeded synthetic classification data in the plane.

    gaussians: class means on a circle of radius 2 with isotropic noise.
    rings: concentric circles of radius 1 + c with radial noise.
    """
    if kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}")
    if n_per_class < 1 or class_count < 1:
        raise ValueError("counts must be positive")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c in range(class_count):
        if kind == "gaussians":
            ang = 2.0 * math.pi * c / class_count
            mean = 2.0 * np.array([math.cos(ang), math.sin(ang)])
            pts = mean + noise * rng.standard_normal((n_per_class, 2))
        else:
            theta = rng.uniform(0.0, 2.0 * math.pi, n_per_class)
            radius = (1.0 + c) + noise * rng.standard_normal(n_per_class)
            pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
        xs.append(pts)
        ys.append(np.full(n_per_class, c, dtype=np.int64))
    return LabeledDataset(
        inputs=np.ascontiguousarray(np.vstack(xs)),
        labels=np.concatenate(ys),
        name=f"{kind}(n={n_per_class},c={class_count},noise={noise})",
        seed=seed,
    )


def init_params(spec: MlpSpec) -> np.ndarray:
    """Uniform weights in [-init_scale, init_scale], zero biases; seeded."""
    rng = np.random.default_rng(spec.seed)
    s = spec.init_scale
    w1 = rng.uniform(-s, s, (spec.hidden_dim, spec.input_dim))
    w2 = rng.uniform(-s, s, (spec.class_count, spec.hidden_dim))
    return np.concatenate(
        [w1.ravel(), np.zeros(spec.hidden_dim), w2.ravel(), np.zeros(spec.class_count)]
    )


def as_objective(spec: MlpSpec, data: LabeledDataset) -> Objective:
    """Mean cross-entropy of the tanh classifier over theta in R^P."""
    if data.inputs.shape[1] != spec.input_dim:
        raise ValueError("dataset input dimension does not match the spec")
    if int(data.labels.max()) >= spec.class_count or int(data.labels.min()) < 0:
        raise ValueError("labels out of range for class_count")
    x = np.ascontiguousarray(data.inputs, dtype=np.float64)
    labels = np.ascontiguousarray(data.labels, dtype=np.int64)
    nin, nh, nc = spec.input_dim, spec.hidden_dim, spec.class_count

    def value(theta):
        loss, _ = kernels.mlp_value_grad(theta, x, labels, nin, nh, nc, want_grad=False)
        return loss

    def grad(theta):
        _, g = kernels.mlp_value_grad(theta, x, labels, nin, nh, nc, want_grad=True)
        return g

    return Objective(
        dim=spec.param_count,
        value_fn=value,
        grad_fn=grad,
        hessian_fn=None,
        name=f"mlp({nin}-{nh}-{nc}) on {data.name}",
        kernel=("mlp", (x, labels, nin, nh, nc)),
    )


def class_probabilities(spec: MlpSpec, theta, inputs) -> np.ndarray:
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    return mlp_probs(theta, np.asarray(inputs, dtype=np.float64),
                     spec.input_dim, spec.hidden_dim, spec.class_count)


def train(obj: Objective, cfg: SamConfig, theta0, record_every: int = 1,
          momentum: float = 0.0) -> Trajectory:
    """Trajectory driver with optional heavy-ball momentum on the update
    direction (the shifted gradient in sam phases). Momentum placement in
    full-batch training is a convention; it defaults off so the dynamics match
    the plain iteration the attractor analysis describes."""
    if not 0.0 <= momentum < 1.0:
        raise ValueError("momentum must be in [0, 1)")
    theta0 = as_point(theta0, obj.dim)
    if momentum == 0.0:
        from .sam_core import run

        return run(obj, cfg, theta0, record_every)
    if obj.kernel is not None and obj.kernel[0] == "mlp" and kernels.run_mlp_loop() is not None:
        return _run_fused_mlp(obj, cfg, theta0, record_every, momentum)
    return _run_generic(obj, cfg, theta0, record_every, momentum)


# ---------------------------------------------------------------------------
# plane slices


@dataclass
class SurfaceGrid:
    center: np.ndarray
    dir_u: np.ndarray
    dir_v: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    values_f: np.ndarray
    values_fsam: np.ndarray

    def to_csv(self, path) -> None:
        lines = ["alpha,beta,f,fsam"]
        for i, a in enumerate(self.alphas):
            for j, b in enumerate(self.betas):
                lines.append(
                    f"{fmt(a)},{fmt(b)},{fmt(self.values_f[i, j])},{fmt(self.values_fsam[i, j])}"
                )
        atomic_write_text(path, "\n".join(lines) + "\n")


def plane_slice(obj: Objective, center, dir_u, dir_v, alphas, betas, rho: float,
                grad_floor: float = 1e-12) -> SurfaceGrid:
    """Evaluate f and the SAM objective on the plane center + a u + b v.

    The directions are orthogonalized (Gram-Schmidt) and norm-matched. Grid
    points with a degenerate ascent direction record NaN in the SAM values
    only.
    """
    center = as_point(center, obj.dim)
    u = as_point(dir_u, obj.dim)
    v = as_point(dir_v, obj.dim)
    un = float(np.linalg.norm(u))
    vn = float(np.linalg.norm(v))
    if un == 0.0 or vn == 0.0:
        raise ValueError("direction vectors must be nonzero")
    v_orth = v - (v @ u) / (un * un) * u
    vo_n = float(np.linalg.norm(v_orth))
    if vo_n < 1e-12 * vn:
        raise ValueError("direction vectors are collinear")
    v = v_orth * (un / vo_n)

    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    values_f = np.empty((alphas.size, betas.size))
    values_fsam = np.empty_like(values_f)
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            p = center + a * u + b * v
            values_f[i, j] = obj.value_fn(p)
            direction = ascent_direction(obj, p, grad_floor)
            if direction is None:
                values_fsam[i, j] = math.nan
            else:
                values_fsam[i, j] = obj.value_fn(p + rho * direction)
    return SurfaceGrid(
        center=center,
        dir_u=u,
        dir_v=v,
        alphas=alphas,
        betas=betas,
        values_f=values_f,
        values_fsam=values_fsam,
    )
