import math

import numpy as np
import pytest

from samhall import landscape, mlp, sam_core
from samhall.mlp import (
    MlpSpec,
    as_objective,
    init_params,
    make_dataset,
    plane_slice,
    train,
)

from fd_oracles import fd_gradient


def small_problem(seed=0):
    spec = MlpSpec(2, 8, 2, 0.5, seed=seed)
    data = make_dataset("gaussians", 25, 2, 0.3, seed=seed + 100)
    return spec, data, as_objective(spec, data)


# --- datasets ------------------------------------------------------------------


def test_gaussians_balanced():
    data = make_dataset("gaussians", 100, 2, 0.3, seed=7)
    assert data.inputs.shape == (200, 2)
    assert (data.labels == 0).sum() == 100
    assert (data.labels == 1).sum() == 100


def test_dataset_deterministic():
    a = make_dataset("gaussians", 50, 3, 0.2, seed=11)
    b = make_dataset("gaussians", 50, 3, 0.2, seed=11)
    np.testing.assert_array_equal(a.inputs, b.inputs)
    np.testing.assert_array_equal(a.labels, b.labels)
    c = make_dataset("rings", 40, 2, 0.1, seed=3)
    d = make_dataset("rings", 40, 2, 0.1, seed=3)
    np.testing.assert_array_equal(c.inputs, d.inputs)


def test_gaussians_zero_noise_collapse():
    data = make_dataset("gaussians", 10, 2, 0.0, seed=5)
    first = data.inputs[:10]
    assert np.allclose(first, first[0])
    np.testing.assert_allclose(np.linalg.norm(first[0]), 2.0, atol=1e-12)


def test_dataset_validation():
    with pytest.raises(ValueError):
        make_dataset("bogus", 10, 2, 0.1, seed=0)
    with pytest.raises(ValueError):
        make_dataset("gaussians", 0, 2, 0.1, seed=0)
    with pytest.raises(ValueError):
        make_dataset("gaussians", 10, 2, -0.1, seed=0)


# --- parameters and objective ----------------------------------------------------


def test_init_params():
    spec = MlpSpec(2, 16, 2, 0.5, seed=4)
    a, b = init_params(spec), init_params(spec)
    np.testing.assert_array_equal(a, b)
    assert a.size == spec.param_count == 16 * 3 + 2 * 17
    zero = init_params(MlpSpec(2, 16, 2, 0.0, seed=4))
    assert not zero.any()
    # biases land at zero
    w1 = 16 * 2
    assert not a[w1:w1 + 16].any()


def test_zero_params_loss_is_log_class_count():
    spec, data, obj = small_problem()
    theta = np.zeros(spec.param_count)
    assert obj.value_fn(theta) == pytest.approx(math.log(2.0), abs=1e-12)
    spec10 = MlpSpec(2, 4, 10, 0.5, seed=0)
    data10 = make_dataset("gaussians", 5, 10, 0.3, seed=1)
    obj10 = as_objective(spec10, data10)
    assert obj10.value_fn(np.zeros(spec10.param_count)) == pytest.approx(math.log(10.0), abs=1e-12)


def test_backprop_matches_fd():
    spec, data, obj = small_problem()
    rng = np.random.default_rng(2)
    for _ in range(5):
        theta = rng.standard_normal(spec.param_count)
        grad = obj.grad_fn(theta)
        idx = rng.choice(spec.param_count, 20, replace=False)
        for j in idx:
            e = np.zeros(spec.param_count)
            e[j] = 1e-6
            want = (obj.value_fn(theta + e) - obj.value_fn(theta - e)) / 2e-6
            assert grad[j] == pytest.approx(want, rel=1e-5, abs=1e-9)


def test_loss_nonnegative_and_softmax_normalized():
    spec, data, obj = small_problem()
    rng = np.random.default_rng(8)
    for _ in range(20):
        theta = 3.0 * rng.standard_normal(spec.param_count)
        assert obj.value_fn(theta) >= 0.0
        probs = mlp.class_probabilities(spec, theta, data.inputs)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_objective_validation():
    spec = MlpSpec(3, 4, 2, 0.5, seed=0)
    data = make_dataset("gaussians", 5, 2, 0.1, seed=0)
    with pytest.raises(ValueError):
        as_objective(spec, data)  # input_dim mismatch: dataset is planar


# --- the training wrapper ---------------------------------------------------------


def test_train_matches_run_without_momentum():
    spec, data, obj = small_problem()
    theta0 = init_params(spec)
    cfg = sam_core.SamConfig(rho=0.5, eta=0.05, mode="sam", max_iters=100)
    a = train(obj, cfg, theta0, record_every=10, momentum=0.0)
    b = sam_core.run(obj, cfg, theta0, record_every=10)
    np.testing.assert_array_equal(a.terminal_point, b.terminal_point)


def test_train_momentum_accelerates_gd():
    spec, data, obj = small_problem()
    theta0 = init_params(spec)
    cfg = sam_core.SamConfig(rho=0.0, eta=0.01, mode="gd", max_iters=300, converge_tol=1e-300)
    plain = train(obj, cfg, theta0, record_every=300, momentum=0.0)
    heavy = train(obj, cfg, theta0, record_every=300, momentum=0.9)
    assert heavy.fs[-1] < plain.fs[-1]


def test_train_momentum_validation():
    spec, data, obj = small_problem()
    with pytest.raises(ValueError):
        train(obj, sam_core.SamConfig(rho=0.0, eta=0.01, mode="gd", max_iters=10),
              init_params(spec), momentum=1.0)


# --- plane slices -------------------------------------------------------------------


def test_plane_slice_center_and_rho_zero():
    syn = landscape.make_builtin("synthetic2d")
    center = np.array([2.0, 1.0])
    alphas = np.linspace(-0.5, 0.5, 5)
    betas = np.linspace(-0.5, 0.5, 5)
    grid = plane_slice(syn, center, [1.0, 0.0], [0.0, 1.0], alphas, betas, rho=0.0)
    i0, j0 = 2, 2  # alpha = beta = 0
    assert grid.values_f[i0, j0] == landscape.evaluate(syn, center)
    mask = np.isfinite(grid.values_fsam)
    np.testing.assert_array_equal(grid.values_fsam[mask], grid.values_f[mask])


def test_plane_slice_orthogonalizes_and_norm_matches():
    syn = landscape.make_builtin("synthetic2d")
    grid = plane_slice(syn, [0.0, 0.0], [2.0, 0.0], [1.0, 1.0],
                       np.linspace(-1, 1, 3), np.linspace(-1, 1, 3), rho=0.5)
    assert abs(grid.dir_u @ grid.dir_v) < 1e-10
    assert abs(np.linalg.norm(grid.dir_u) - np.linalg.norm(grid.dir_v)) < 1e-10


def test_plane_slice_rejects_bad_directions():
    syn = landscape.make_builtin("synthetic2d")
    al = np.linspace(-1, 1, 3)
    with pytest.raises(ValueError):
        plane_slice(syn, [0.0, 0.0], [0.0, 0.0], [1.0, 0.0], al, al, rho=0.5)
    with pytest.raises(ValueError):
        plane_slice(syn, [0.0, 0.0], [1.0, 0.0], [2.0, 0.0], al, al, rho=0.5)


def test_plane_slice_reproduces_1d_section_of_quartic():
    # embed the 1d quartic in the plane (constant in the second coordinate)
    # and slice along e1 from x_h toward the shifted point x_h + rho*u
    rho = 1.0 + math.sqrt(0.1)
    q = landscape.make_builtin("quartic1d")
    emb = landscape.Objective(
        dim=2,
        value_fn=lambda p: q.value_fn(p[:1]),
        grad_fn=lambda p: np.array([q.grad_fn(p[:1])[0], 0.0]),
        name="quartic1d embedded",
    )
    center = np.array([rho, 0.0])     # x_h; u = -e1 there, x_h + rho*u = 0
    dir_u = np.array([-rho, 0.0])     # alpha=1 lands on the shifted point
    alphas = np.linspace(0.0, 1.0, 5)
    betas = np.array([0.0, 1.0])
    grid = plane_slice(emb, center, dir_u, [0.0, 1.0], alphas, betas, rho=rho)
    assert grid.values_f[0, 0] == pytest.approx(q.value_fn(np.array([rho])), abs=1e-14)
    assert grid.values_f[-1, 0] == pytest.approx(0.0, abs=1e-14)
    assert grid.values_f[-1, 0] == pytest.approx(
        sam_core.sam_value(emb, center, rho), abs=1e-12
    )


def test_surface_csv(tmp_path):
    syn = landscape.make_builtin("synthetic2d")
    grid = plane_slice(syn, [-1.55, 0.0], [1.0, 0.0], [0.0, 1.0],
                       np.linspace(-0.1, 0.1, 3), np.linspace(-0.1, 0.1, 3), rho=0.5)
    path = tmp_path / "s.csv"
    grid.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "alpha,beta,f,fsam"
    assert len(lines) == 10
    # the center row of this slice is the curve point: degenerate, NaN fsam
    center_rows = [l for l in lines[1:] if l.startswith("0.0,0.0")]
    assert center_rows and center_rows[0].endswith("nan")
