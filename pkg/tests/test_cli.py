import csv
import json
import math
import os

import numpy as np
import pytest

from samhall import cli

RHO_Q = 1.0 + math.sqrt(0.1)


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run_cli(*argv):
    return cli.main(list(argv))


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_quartic_hallucinated(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quartic1d",
        "rho": RHO_Q, "eta": 1e-3, "mode": "sam", "max_iters": 100000,
        "x0": [1.35], "record_every": 500,
    })
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", str(out)) == 0
    report = json.loads((out / "stationary_report.json").read_text())
    assert report["classification"] == "hallucinated_minimizer"
    side = json.loads((out / "trajectory.json").read_text())
    assert side["terminal_status"] == "converged_shifted_grad"
    rows = read_csv(out / "trajectory.csv")
    assert list(rows[0]) == ["k", "f", "grad_norm", "shifted_grad_norm"]


def test_run_gd_true_stationary(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quartic1d",
        "rho": 0.0, "eta": 0.01, "mode": "gd", "max_iters": 100000,
        "converge_tol": 1e-10, "x0": [0.5], "record_every": 1000,
    })
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", str(out)) == 0
    report = json.loads((out / "stationary_report.json").read_text())
    assert report["classification"] == "true_stationary"
    assert abs(report["point"][0]) < 1e-4


def test_invalid_output_dir_exit_2(tmp_path):
    cfg = write_config(tmp_path, {"objective": "quartic1d", "rho": 1.0, "eta": 0.1,
                                  "x0": [1.5], "max_iters": 10})
    assert run_cli("run", "--config", cfg) == 2  # no --out, no config key
    bad = tmp_path / "file_not_dir"
    bad.write_text("x")
    assert run_cli("run", "--config", cfg, "--out", str(bad / "sub")) == 2


def test_bad_config_exit_2(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert run_cli("run", "--config", str(path), "--out", str(tmp_path / "o")) == 2
    cfg = write_config(tmp_path, {"objective": "nope", "rho": 1.0, "eta": 0.1, "x0": [1.0]})
    assert run_cli("run", "--config", cfg, "--out", str(tmp_path / "o2")) == 2


def test_divergence_exit_1_with_report(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quadratic", "objective_params": {"A": [[1.0]]},
        "rho": 0.0, "eta": 3.0, "mode": "gd", "max_iters": 1000,
        "converge_tol": 1e-300, "x0": [1.0],
    })
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", str(out)) == 1
    report = json.loads((out / "error_report.json").read_text())
    assert report["error"] == "DivergenceError"
    assert "last_finite_state" in report


def test_field_rho_zero_grids_match(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "synthetic2d", "rho": 0.0, "grid_points": 40,
    })
    out = tmp_path / "out"
    assert run_cli("field", "--config", cfg, "--out", str(out)) == 0
    f_rows = read_csv(out / "grid_f.csv")
    s_rows = read_csv(out / "grid_fsam.csv")
    assert len(f_rows) == len(s_rows) == 1600
    for a, b in zip(f_rows, s_rows):
        if b["fsam"] != "nan":
            assert float(a["f"]) == float(b["fsam"])
    field_rows = read_csv(out / "field.csv")
    assert list(field_rows[0]) == ["x", "y", "gx", "gy"]


def test_field_requires_dim_2(tmp_path):
    cfg = write_config(tmp_path, {"objective": "quartic1d", "rho": 0.5, "grid_points": 10})
    assert run_cli("field", "--config", cfg, "--out", str(tmp_path / "o")) == 2


def test_sweep_quartic_modes(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quartic1d",
        "rho_list": [0.5, 1.32], "seed_list": list(range(8)),
        "modes": ["sam", "switch"], "eta": 0.01, "max_iters": 20000,
        "x0_range": [1.0, 2.0],
    })
    out = tmp_path / "out"
    assert run_cli("sweep", "--config", cfg, "--out", str(out), "--threads", "2") == 0
    rows = read_csv(out / "runs.csv")
    assert len(rows) == 2 * 8 * 2
    switch_rows = [r for r in rows if r["mode"] == "switch"]
    assert all(float(r["final_loss"]) < 1e-6 for r in switch_rows)
    sam_132 = [r for r in rows if r["mode"] == "sam" and float(r["rho"]) == 1.32]
    assert any(r["classification"] == "hallucinated_minimizer" for r in sam_132)
    summary = read_csv(out / "summary.csv")
    assert len(summary) == 4
    srow = [r for r in summary if r["mode"] == "switch" and float(r["rho"]) == 1.32][0]
    assert float(srow["mean_final_loss"]) < 1e-6


def test_sweep_empty_seed_list_exit_2(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quartic1d", "rho_list": [0.5], "seed_list": [],
        "eta": 0.01, "x0_range": [1.0, 2.0],
    })
    assert run_cli("sweep", "--config", cfg, "--out", str(tmp_path / "o")) == 2


def test_sweep_gd_never_hallucinates(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quartic1d",
        "rho_list": [1.32], "seed_list": list(range(6)), "modes": ["gd"],
        "eta": 0.01, "max_iters": 20000, "x0_range": [1.0, 2.0],
    })
    out = tmp_path / "out"
    assert run_cli("sweep", "--config", cfg, "--out", str(out)) == 0
    rows = read_csv(out / "runs.csv")
    assert all(r["classification"] != "hallucinated_minimizer" for r in rows)


def test_construct_cli_golden(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quartic1d",
        "x_star": [0.0], "x_bullet": [1.0], "epsilon": 0.19,
        "box": [[0.0, 2.0]], "resolution": 1e-4,
    })
    out = tmp_path / "out"
    assert run_cli("construct", "--config", cfg, "--out", str(out)) == 0
    doc = json.loads((out / "construction_report.json").read_text())
    assert abs(doc["x_h"][0] - RHO_Q) < 1e-6
    assert doc["classification"]["classification"] == "hallucinated_minimizer"
    assert not doc["x_bullet_auto"]
    mask_lines = (out / "component_mask.csv").read_text().strip().split("\n")
    assert mask_lines[0] == "i,f"


def test_construct_cli_auto_bullet(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quartic1d",
        "x_star": [0.0], "epsilon": 0.19,
        "box": [[0.0, 2.0]], "resolution": 1e-3,
    })
    out = tmp_path / "out"
    assert run_cli("construct", "--config", cfg, "--out", str(out)) == 0
    doc = json.loads((out / "construction_report.json").read_text())
    assert doc["x_bullet_auto"]
    assert abs(doc["x_bullet"][0] - 1.0) <= 1e-3


def test_construct_epsilon_too_large_exit_1(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quartic1d",
        "x_star": [0.0], "x_bullet": [1.0], "epsilon": 1.5,
        "box": [[0.0, 2.0]], "resolution": 1e-3,
    })
    out = tmp_path / "out"
    assert run_cli("construct", "--config", cfg, "--out", str(out)) == 1
    assert (out / "error_report.json").exists()


def test_construct_dim_guard(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quadratic", "objective_params": {"A": np.eye(4).tolist()},
        "x_star": [0.0] * 4, "epsilon": 0.1,
        "box": [[-1.0, 1.0]] * 4, "resolution": 0.1,
    })
    assert run_cli("construct", "--config", cfg, "--out", str(tmp_path / "o")) == 2


def test_continue_cli(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "synthetic2d",
        "x_h": [1.25, 0.0], "rho": 2.8,
        "curve": "synthetic2d_minimizers", "curve_samples": 21,
        "max_step": 0.5,
    })
    out = tmp_path / "out"
    assert run_cli("continue", "--config", cfg, "--out", str(out)) == 0
    rows = read_csv(out / "continuation.csv")
    assert len(rows) >= 10
    assert all(float(r["residual"]) < 1e-8 for r in rows)


def test_slice_cli(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "synthetic2d",
        "center": [1.25, 0.0], "dir_u": [1.0, 0.0], "dir_v": [0.0, 1.0],
        "alpha_range": [-0.2, 0.2, 5], "beta_range": [-0.2, 0.2, 5],
        "rho": 2.8,
    })
    out = tmp_path / "out"
    assert run_cli("slice", "--config", cfg, "--out", str(out)) == 0
    rows = read_csv(out / "slice.csv")
    assert len(rows) == 25
    assert list(rows[0]) == ["alpha", "beta", "f", "fsam"]


def test_train_mlp_cli(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "mlp",
        "mlp": {"input_dim": 2, "hidden_dim": 8, "class_count": 2,
                 "init_scale": 0.5, "seed": 1},
        "dataset": {"kind": "gaussians", "n_per_class": 25, "class_count": 2,
                     "noise": 0.3, "seed": 2},
        "rho": 0.5, "eta": 0.1, "mode": "switch", "max_iters": 3000,
        "record_every": 500, "momentum": 0.0,
    })
    out = tmp_path / "out"
    assert run_cli("train-mlp", "--config", cfg, "--out", str(out)) == 0
    assert (out / "trajectory.csv").exists()
    assert (out / "stationary_report.json").exists()


def test_determinism_same_config_same_bytes(tmp_path):
    cfg = write_config(tmp_path, {
        "objective": "quartic1d",
        "rho": 1.32, "eta": 0.01, "mode": "sam", "max_iters": 3000,
        "x0": [1.7], "record_every": 100,
    })
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert run_cli("run", "--config", cfg, "--out", str(out1)) == 0
    assert run_cli("run", "--config", cfg, "--out", str(out2)) == 0
    for name in ("trajectory.csv", "trajectory.json", "stationary_report.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
