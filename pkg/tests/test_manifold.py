import math

import numpy as np
import pytest

from samhall import landscape, manifold, sam_core
from samhall.landscape import make_builtin
from samhall.manifold import (
    NewtonError,
    continue_manifold,
    newton_solve_preimage,
)

RHO_Q = 1.0 + math.sqrt(0.1)


def test_newton_affine_branch():
    q = make_builtin("quartic1d")
    y = newton_solve_preimage(q, [0.0], RHO_Q, [1.3])
    assert abs(y[0] - RHO_Q) < 1e-12
    y = newton_solve_preimage(q, [0.01], RHO_Q, [1.3])
    assert abs(y[0] - (0.01 + RHO_Q)) < 1e-12


def test_newton_no_preimage_for_convex():
    q1 = make_builtin("quadratic", A=np.eye(1))
    with pytest.raises(NewtonError):
        newton_solve_preimage(q1, [0.0], 0.5, [1.0])


def test_newton_roundtrip_on_synthetic2d():
    syn = make_builtin("synthetic2d")
    rho = 2.8
    target = np.array([-1.55, 0.0])
    y = newton_solve_preimage(syn, target, rho, [1.2, 0.1])
    u = sam_core.ascent_direction(syn, y)
    assert np.linalg.norm(y + rho * u - target) < 1e-10


def test_single_point_curve():
    q = make_builtin("quartic1d")
    res = continue_manifold(q, [RHO_Q], RHO_Q, [[0.0]], max_step=0.5)
    assert len(res) == 1
    assert abs(res.preimages[0, 0] - RHO_Q) < 1e-8
    assert res.residuals[0] < 1e-10


def test_first_point_precondition():
    q = make_builtin("quartic1d")
    with pytest.raises(ValueError):
        continue_manifold(q, [RHO_Q], RHO_Q, [[0.5]], max_step=0.5)


def test_continuation_along_synthetic2d_curve():
    syn = make_builtin("synthetic2d")
    rho = 2.8
    x_h = newton_solve_preimage(syn, [-1.55, 0.0], rho, [1.25, 0.0])
    ys = np.linspace(0.0, -0.6, 41)
    curve = np.column_stack([-1.55 * np.cos(ys / 1.5), ys])
    res = continue_manifold(syn, x_h, rho, curve, max_step=0.5)
    assert len(res) >= 20
    assert np.all(res.residuals < 1e-8)
    assert np.all(res.jacobian_min_singular > 1e-12)
    for target, y in zip(res.targets, res.preimages):
        u = sam_core.ascent_direction(syn, y)
        assert np.linalg.norm(y + rho * u - target) < 1e-10
    hops = np.linalg.norm(np.diff(res.preimages, axis=0), axis=1)
    assert np.all(hops <= 0.5)


def test_continuation_preimages_are_sam_stationary():
    syn = make_builtin("synthetic2d")
    rho = 2.8
    x_h = newton_solve_preimage(syn, [-1.55, 0.0], rho, [1.25, 0.0])
    ys = np.linspace(0.0, 0.6, 21)
    curve = np.column_stack([-1.55 * np.cos(ys / 1.5), ys])
    res = continue_manifold(syn, x_h, rho, curve, max_step=0.5)
    for target, y in zip(res.targets, res.preimages):
        if np.linalg.norm(syn.grad_fn(target)) < 1e-8:
            assert np.linalg.norm(sam_core.shifted_gradient(syn, y, rho)) < 1e-8


def test_continuation_csv(tmp_path):
    syn = make_builtin("synthetic2d")
    rho = 2.8
    x_h = newton_solve_preimage(syn, [-1.55, 0.0], rho, [1.25, 0.0])
    ys = np.linspace(0.0, -0.3, 11)
    curve = np.column_stack([-1.55 * np.cos(ys / 1.5), ys])
    res = continue_manifold(syn, x_h, rho, curve, max_step=0.5)
    path = tmp_path / "cont.csv"
    res.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,target0,target1,preimage0,preimage1,residual,min_singular"
    assert len(lines) == len(res) + 1


def test_truncation_without_error_on_bad_segment():
    # walking the curve past the window edge hits degenerate/singular points;
    # the result is truncated rather than raising
    syn = make_builtin("synthetic2d")
    rho = 2.8
    x_h = newton_solve_preimage(syn, [-1.55, 0.0], rho, [1.25, 0.0])
    ys = np.concatenate([np.linspace(0.0, 0.6, 13), np.linspace(0.7, 3.0, 12)])
    curve = np.column_stack([-1.55 * np.cos(ys / 1.5), ys])
    res = continue_manifold(syn, x_h, rho, curve, max_step=0.25)
    assert 0 < len(res) <= len(curve)
