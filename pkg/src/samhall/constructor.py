"""Numerical realization of the existence construction.

Builds the connected superlevel component around a local maximizer on a grid,
takes the component point farthest from a given minimizer, and polishes it
onto the level set so that the gradient points exactly at the minimizer. The
resulting pair (x_h, rho = |x_h - x_star|) satisfies x_h + rho u(x_h) = x_star
up to the refinement tolerance, which makes x_h a minimizer of the SAM
objective with a non-vanishing raw gradient.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ._io import atomic_write_json, atomic_write_text, fmt
from .detector import LagrangeReport, StationaryReport, classify, lagrange_check
from .landscape import Objective, as_point
from .sam_core import sam_value

REFINE_MAX_ALTERNATIONS = 1000
REFINE_ALIGN_TOL = 1e-13
REFINE_ALIGN_STALL = 1e-8


class ConstructionError(RuntimeError):
    pass


@dataclass
class ComponentMask:
    box: np.ndarray          # (dim, 2) axis-aligned bounds
    resolution: np.ndarray   # (dim,) grid spacing
    shape: tuple             # cells per axis
    cells: np.ndarray        # (n_cells, dim) integer indices, lexicographically sorted
    values: np.ndarray       # f at cell centers, aligned with cells
    epsilon: float
    level: float

    def centers(self) -> np.ndarray:
        return self.box[:, 0] + (self.cells + 0.5) * self.resolution

    def to_csv(self, path) -> None:
        dim = self.cells.shape[1]
        header = ",".join(_idx_name(k) for k in range(dim))
        lines = [header + ",f"]
        for idx, val in zip(self.cells, self.values):
            lines.append(",".join(str(int(i)) for i in idx) + "," + fmt(val))
        atomic_write_text(path, "\n".join(lines) + "\n")


def _idx_name(k):
    return "ijklmn"[k] if k < 6 else f"i{k}"


@dataclass
class ConstructionReport:
    x_h: np.ndarray
    x_star: np.ndarray
    rho: float
    boundary_level_residual: float
    sam_value_gap: float
    lagrange: LagrangeReport
    refined: bool
    classification: StationaryReport
    x_bullet: np.ndarray
    epsilon: float
    level: float

    def to_dict(self):
        return {
            "x_h": [float(v) for v in self.x_h],
            "x_star": [float(v) for v in self.x_star],
            "rho": self.rho,
            "boundary_level_residual": self.boundary_level_residual,
            "sam_value_gap": self.sam_value_gap,
            "lagrange": self.lagrange.to_dict(),
            "refined": self.refined,
            "classification": self.classification.to_dict(),
            "x_bullet": [float(v) for v in self.x_bullet],
            "epsilon": self.epsilon,
            "level": self.level,
        }

    def to_json(self, path) -> None:
        atomic_write_json(path, self.to_dict())


def _grid_geometry(box, resolution, dim):
    box = np.asarray(box, dtype=np.float64)
    if box.shape != (dim, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ConstructionError(f"box must be ({dim}, 2) with lo < hi per axis")
    res = np.asarray(resolution, dtype=np.float64)
    if res.ndim == 0:
        res = np.full(dim, float(res))
    if res.shape != (dim,) or np.any(res <= 0):
        raise ConstructionError("resolution must be a positive spacing per dimension")
    shape = tuple(int(max(1, round((hi - lo) / r))) for (lo, hi), r in zip(box, res))
    return box, res, shape


def superlevel_component(obj: Objective, box, resolution, x_bullet, epsilon: float) -> ComponentMask:
    """Flood fill the connected component of {f >= f(x_bullet) - epsilon}.

    The fill runs on cell centers with face connectivity and aborts if it
    reaches the evaluation box boundary, which is the observable counterpart
    of the compactness requirement on the component.
    """
    x_bullet = as_point(x_bullet, obj.dim)
    if epsilon <= 0:
        raise ConstructionError("epsilon must be positive")
    box, res, shape = _grid_geometry(box, resolution, obj.dim)

    def center(idx):
        return box[:, 0] + (np.asarray(idx, dtype=np.float64) + 0.5) * res

    f_bullet = float(obj.value_fn(x_bullet))
    level = f_bullet - epsilon

    seed = tuple(
        int(np.clip((x_bullet[k] - box[k, 0]) / res[k], 0, shape[k] - 1))
        for k in range(obj.dim)
    )

    # sanity: x_bullet should dominate the nearby grid values
    for idx in _neighborhood_indices(seed, shape, radius=2):
        if float(obj.value_fn(center(idx))) > f_bullet + 1e-12:
            raise ConstructionError(
                "x_bullet is not a local grid maximum; supply a better maximizer"
            )

    values = {}

    def cell_value(idx):
        v = values.get(idx)
        if v is None:
            v = float(obj.value_fn(center(idx)))
            values[idx] = v
        return v

    if cell_value(seed) < level:
        raise ConstructionError("the cell containing x_bullet lies below the level")

    component = {seed}
    queue = deque([seed])
    while queue:
        idx = queue.popleft()
        for k in range(obj.dim):
            if idx[k] == 0 or idx[k] == shape[k] - 1:
                raise ConstructionError(
                    "superlevel component reaches the box boundary; "
                    "epsilon too large or box too small"
                )
        for nb in _face_neighbors(idx, shape):
            if nb in component:
                continue
            if cell_value(nb) >= level:
                component.add(nb)
                queue.append(nb)

    cells = np.array(sorted(component), dtype=np.int64)
    vals = np.array([values[tuple(c)] for c in cells])
    return ComponentMask(
        box=box,
        resolution=res,
        shape=shape,
        cells=cells,
        values=vals,
        epsilon=float(epsilon),
        level=level,
    )


def _face_neighbors(idx, shape):
    for k in range(len(shape)):
        for d in (-1, 1):
            j = idx[k] + d
            if 0 <= j < shape[k]:
                yield idx[:k] + (j,) + idx[k + 1 :]


def _neighborhood_indices(seed, shape, radius):
    dim = len(shape)
    ranges = [
        range(max(0, seed[k] - radius), min(shape[k], seed[k] + radius + 1))
        for k in range(dim)
    ]
    out = [()]
    for r in ranges:
        out = [t + (i,) for t in out for i in r]
    return out


def construct_hallucinated(
    obj: Objective,
    x_star,
    x_bullet,
    epsilon: float,
    box,
    resolution,
    refine: bool = True,
) -> ConstructionReport:
    """Construct a hallucinated minimizer from a minimizer/maximizer pair."""
    x_star = as_point(x_star, obj.dim)
    mask = superlevel_component(obj, box, resolution, x_bullet, epsilon)
    centers = mask.centers()
    d2 = ((centers - x_star) ** 2).sum(axis=1)
    x_h = centers[int(np.argmax(d2))]  # cells are lexicographically sorted: first max wins

    refined = False
    if refine:
        x_ref = _refine_farthest(obj, x_h, x_star, mask.level)
        if x_ref is not None:
            x_h, refined = x_ref, True

    rho = float(np.linalg.norm(x_h - x_star))
    lag = lagrange_check(obj, x_h, x_star)
    return ConstructionReport(
        x_h=x_h,
        x_star=x_star,
        rho=rho,
        boundary_level_residual=abs(float(obj.value_fn(x_h)) - mask.level),
        sam_value_gap=abs(sam_value(obj, x_h, rho) - float(obj.value_fn(x_star))),
        lagrange=lag,
        refined=refined,
        classification=classify(obj, x_h, rho),
        x_bullet=as_point(x_bullet, obj.dim),
        epsilon=float(epsilon),
        level=mask.level,
    )


def _refine_farthest(obj, x0, x_star, level):
    """Polish the grid argmax: alternate tangential ascent of |x - x_star|^2
    with a bisection back onto {f = level} along the gradient line.

    A step is accepted when it strictly increases the squared distance or,
    once that gain falls under float resolution, when it strictly shrinks the
    tangential misalignment of the gradient with x_star - x (the Lagrange
    residual), which stays measurable down to machine precision."""

    def misalignment(p):
        g = np.asarray(obj.grad_fn(p), dtype=np.float64)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            return None
        d = p - x_star
        return float(np.linalg.norm(d - (d @ g) / (gn * gn) * g))

    x = _project_to_level(obj, x0, level)
    if x is None:
        return None
    alpha = 1.0
    for _ in range(REFINE_MAX_ALTERNATIONS):
        g = np.asarray(obj.grad_fn(x), dtype=np.float64)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            return None
        n_hat = g / gn
        d = x - x_star
        d_t = d - (d @ n_hat) * n_hat
        align = float(np.linalg.norm(d_t))
        scale = float(np.linalg.norm(d))
        if align <= REFINE_ALIGN_TOL * max(1.0, scale):
            return x
        improved = False
        dist2 = float(d @ d)
        while alpha > 1e-18:
            cand = _project_to_level(obj, x + alpha * d_t, level)
            if cand is not None:
                cand_align = misalignment(cand)
                cand_dist2 = float((cand - x_star) @ (cand - x_star))
                if cand_dist2 > dist2 or (cand_align is not None and cand_align < align):
                    x = cand
                    improved = True
                    alpha = min(2.0 * alpha, 1.0)
                    break
            alpha *= 0.5
        if not improved:
            return x if align <= REFINE_ALIGN_STALL else None
    return None


def _project_to_level(obj, y, level, max_expand=60, bisect_iters=90):
    """Root of f(y + t g_hat) = level along the gradient line through y."""
    g = np.asarray(obj.grad_fn(y), dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn == 0.0 or not np.isfinite(gn):
        return None
    n_hat = g / gn
    phi0 = float(obj.value_fn(y)) - level
    if phi0 == 0.0:
        return y
    # f increases along +n_hat to first order; bracket on the deficit side
    direction = -1.0 if phi0 > 0.0 else 1.0
    step = abs(phi0) / gn
    t_prev, phi_prev = 0.0, phi0
    t = direction * step
    for _ in range(max_expand):
        phi = float(obj.value_fn(y + t * n_hat)) - level
        if phi == 0.0:
            return y + t * n_hat
        if phi * phi_prev < 0.0:
            break
        t_prev, phi_prev = t, phi
        t *= 2.0
    else:
        return None
    lo, hi = (t_prev, t) if t_prev < t else (t, t_prev)
    flo = float(obj.value_fn(y + lo * n_hat)) - level
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        fmid = float(obj.value_fn(y + mid * n_hat)) - level
        if fmid == 0.0:
            lo = hi = mid
            break
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return y + 0.5 * (lo + hi) * n_hat
