import math

import numpy as np
import pytest

from samhall import constructor, landscape
from samhall.constructor import (
    ConstructionError,
    construct_hallucinated,
    superlevel_component,
)
from samhall.landscape import make_builtin

SQ01 = math.sqrt(0.1)
XH = 1.0 + SQ01
BOX1 = [[0.0, 2.0]]


def test_component_endpoints_quartic():
    q = make_builtin("quartic1d")
    mask = superlevel_component(q, BOX1, 1e-4, [1.0], 0.19)
    centers = mask.centers()[:, 0]
    # level 0.81: component is [1 - sqrt(0.1), 1 + sqrt(0.1)] up to the grid
    assert abs(centers.min() - (1.0 - SQ01)) <= 1e-4
    assert abs(centers.max() - XH) <= 1e-4
    assert mask.level == pytest.approx(0.81, abs=1e-15)
    assert (mask.values >= mask.level).all()


def test_component_epsilon_too_large():
    q = make_builtin("quartic1d")
    with pytest.raises(ConstructionError):
        superlevel_component(q, BOX1, 1e-4, [1.0], 1.5)


def test_component_collapses_as_epsilon_vanishes():
    q = make_builtin("quartic1d")
    mask = superlevel_component(q, BOX1, 1e-4, [1.0], 1e-6)
    centers = mask.centers()[:, 0]
    assert len(mask.cells) <= 25
    assert np.all(np.abs(centers - 1.0) < 2e-3)


def test_component_rejects_non_maximum_seed():
    q = make_builtin("quartic1d")
    with pytest.raises(ConstructionError):
        superlevel_component(q, BOX1, 1e-4, [1.2], 0.19)


def test_golden_construction():
    q = make_builtin("quartic1d")
    rep = construct_hallucinated(q, [0.0], [1.0], 0.19, BOX1, 1e-4)
    assert rep.refined
    assert abs(rep.x_h[0] - XH) < 1e-6
    assert rep.rho == pytest.approx(rep.x_h[0], abs=0)
    assert abs(rep.sam_value_gap) < 1e-10
    assert rep.lagrange.lam > 0
    assert rep.lagrange.alignment > 0
    assert rep.boundary_level_residual < 1e-8
    assert rep.classification.classification == "hallucinated_minimizer"


def test_mirror_construction():
    q = make_builtin("quartic1d")
    rep = construct_hallucinated(q, [2.0], [1.0], 0.19, BOX1, 1e-4)
    assert abs(rep.x_h[0] - (1.0 - SQ01)) < 1e-6
    assert rep.rho == pytest.approx(XH, abs=1e-6)
    # u(x_h) = +1 on (0, 1): the shifted point is exactly the minimizer at 2
    assert abs((rep.x_h[0] + rep.rho) - 2.0) < 1e-6


def test_target_identity_and_rho_lower_bound():
    q = make_builtin("quartic1d")
    rep = construct_hallucinated(q, [0.0], [1.0], 0.19, BOX1, 1e-4)
    g = q.grad_fn(rep.x_h)
    u = g / np.linalg.norm(g)
    assert np.linalg.norm(rep.x_h + rep.rho * u - rep.x_star) < 1e-8
    assert rep.rho >= np.linalg.norm(np.asarray([1.0]) - rep.x_star) - 1e-4 * math.sqrt(1)


def test_grid_consistency_under_refinement_of_resolution():
    q = make_builtin("quartic1d")
    xs = []
    for res in (2e-3, 1e-3):
        rep = construct_hallucinated(q, [0.0], [1.0], 0.19, BOX1, res, refine=False)
        xs.append(rep.x_h[0])
    assert abs(xs[0] - xs[1]) <= 2 * 2e-3 * math.sqrt(1)


def test_synthetic2d_construction():
    syn = make_builtin("synthetic2d")
    box = [[-6.0, 6.0], [-6.0, 6.0]]
    axis = np.arange(-6.0 + 0.015, 6.0, 0.03)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    vals, _ = landscape.batch_value_grad(syn, pts)
    x_bullet = pts[int(np.argmax(vals))]
    rep = construct_hallucinated(syn, [-1.55, 0.0], x_bullet, 0.05, box, 0.03)
    assert rep.refined
    assert rep.boundary_level_residual < 1e-6
    assert rep.classification.classification == "hallucinated_minimizer"
    assert rep.lagrange.alignment > 0 and rep.lagrange.lam > 0
    assert np.linalg.norm(rep.x_h + rep.rho * _unit_grad(syn, rep.x_h) - rep.x_star) < 1e-8


def _unit_grad(obj, x):
    g = obj.grad_fn(np.asarray(x))
    return g / np.linalg.norm(g)


def test_component_csv_schema(tmp_path):
    q = make_builtin("quartic1d")
    mask = superlevel_component(q, BOX1, 1e-3, [1.0], 0.19)
    path = tmp_path / "mask.csv"
    mask.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "i,f"
    assert len(lines) == len(mask.cells) + 1
    syn = make_builtin("synthetic2d")
    axis = np.arange(-6.0 + 0.015, 6.0, 0.03)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    vals, _ = landscape.batch_value_grad(syn, pts)
    mask2 = superlevel_component(
        syn, [[-6.0, 6.0], [-6.0, 6.0]], 0.03, pts[int(np.argmax(vals))], 0.05
    )
    path2 = tmp_path / "mask2.csv"
    mask2.to_csv(path2)
    assert path2.read_text().split("\n")[0] == "i,j,f"


def test_report_json(tmp_path):
    q = make_builtin("quartic1d")
    rep = construct_hallucinated(q, [0.0], [1.0], 0.19, BOX1, 1e-3)
    path = tmp_path / "rep.json"
    rep.to_json(path)
    import json

    doc = json.loads(path.read_text())
    for key in ("x_h", "x_star", "rho", "boundary_level_residual", "sam_value_gap",
                "lagrange", "refined", "classification"):
        assert key in doc
