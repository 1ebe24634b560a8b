"""Compare the compiled fused loops against the pure-Python/numpy paths.

Times three hot spots: the SAM trajectory loop on an analytic landscape, the
400x400 batch evaluation grid, and the full-batch classifier SAM loop. Run as

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import math
import time

import numpy as np

from samhall import kernels, landscape, mlp, sam_core


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_trajectory(repeat):
    q = landscape.make_builtin("quartic1d")
    cfg = sam_core.SamConfig(rho=1.0 + math.sqrt(0.1), eta=1e-5, mode="sam",
                             max_iters=100_000, converge_tol=1e-300)

    def compiled():
        kernels.set_backend("compiled")
        sam_core.run(q, cfg, [1.35], record_every=10_000)

    def generic():
        kernels.set_backend("python")
        sam_core.run(q, cfg, [1.35], record_every=10_000)

    return best_of(compiled, repeat), best_of(generic, repeat), "100k SAM steps, quartic1d"


def bench_batch(repeat):
    syn = landscape.make_builtin("synthetic2d")
    axis = np.linspace(-6, 6, 400)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])

    def compiled():
        kernels.set_backend("compiled")
        landscape.batch_value_grad(syn, pts)

    def fallback():
        kernels.set_backend("python")
        landscape.batch_value_grad(syn, pts)

    return best_of(compiled, repeat), best_of(fallback, repeat), "160k-point value+grad grid"


def bench_mlp(repeat):
    spec = mlp.MlpSpec(2, 16, 2, 0.5, seed=0)
    data = mlp.make_dataset("gaussians", 100, 2, 0.3, seed=7)
    obj = mlp.as_objective(spec, data)
    theta0 = mlp.init_params(spec)
    cfg = sam_core.SamConfig(rho=4.0, eta=0.1, mode="sam", max_iters=2_000,
                             converge_tol=1e-300)

    def compiled():
        kernels.set_backend("compiled")
        sam_core.run(obj, cfg, theta0, record_every=1_000)

    def generic():
        kernels.set_backend("python")
        sam_core.run(obj, cfg, theta0, record_every=1_000)

    return best_of(compiled, repeat), best_of(generic, repeat), "2k SAM steps, 2-16-2 classifier"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not kernels.HAVE_COMPILED:
        raise SystemExit("compiled extension unavailable; nothing to compare")

    print(f"{'benchmark':<34} {'compiled':>10} {'pure':>10} {'speedup':>8}")
    for bench in (bench_trajectory, bench_batch, bench_mlp):
        fast, slow, label = bench(args.repeat)
        print(f"{label:<34} {fast:>9.3f}s {slow:>9.3f}s {slow / fast:>7.1f}x")
    kernels.set_backend("compiled")


if __name__ == "__main__":
    main()
