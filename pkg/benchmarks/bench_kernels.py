"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each kernel at the two synthetic-experiment shapes plus one larger
shape, and times a short end-to-end chain under the active backend.

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from matmed import kernels
from matmed.gibbs import SamplerConfig, run_chain
from matmed.model import paper_truth_params, simulate_dataset
from matmed.tensor import sample_uniform_stiefel

SHAPES = [
    ("low  (n=300, 10x10, 2x2)", 300, 10, 10, 2, 2),
    ("high (n=300, 10x50, 2x2)", 300, 10, 50, 2, 2),
    ("app  (n=100, 7x69, 6x8)", 100, 7, 69, 6, 8),
]


def _args_for(name, Xc, A, B, T, a, u):
    if name == "residual_sumsq":
        return (Xc, A, T, B)
    if name == "project_features":
        return (Xc, A, B)
    if name == "loading_cross_a":
        return (Xc, B, T)
    if name == "loading_cross_b":
        return (Xc, A, T)
    return (a, u)


def _time(fn, args, min_time=0.2):
    fn(*args)  # warm-up / compile
    reps, elapsed = 0, 0.0
    t0 = time.perf_counter()
    while elapsed < min_time:
        fn(*args)
        reps += 1
        elapsed = time.perf_counter() - t0
    return elapsed / reps


def main():
    rng = np.random.default_rng(0)
    np_impls = kernels.numpy_impls()
    nb_impls = kernels.numba_impls()
    print(f"{'shape':28s} {'kernel':22s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for label, n, p, q, p0, q0 in SHAPES:
        Xc = rng.standard_normal((n, p, q))
        A = sample_uniform_stiefel(p, p0, rng)
        B = sample_uniform_stiefel(q, q0, rng)
        T = rng.standard_normal((n, p0, q0))
        a = rng.standard_normal(n)
        u = rng.random(n)
        for name in np_impls:
            args = _args_for(name, Xc, A, B, T, a, u)
            t_np = _time(np_impls[name], args)
            t_nb = _time(nb_impls[name], args)
            print(f"{label:28s} {name:22s} {t_np * 1e6:8.1f}us {t_nb * 1e6:8.1f}us "
                  f"{t_np / t_nb:7.2f}x")

    print(f"\nend-to-end chain (active backend: {kernels.active_backend()})")
    truth = paper_truth_params("low", np.random.default_rng(1))
    data, _ = simulate_dataset(truth, 300, np.random.default_rng(2))
    cfg = SamplerConfig(iterations=200, burn_in=100, thin=5, seed=3)
    run_chain(data, data.dims(2, 2), cfg)  # warm-up
    t0 = time.perf_counter()
    cfg = SamplerConfig(iterations=1000, burn_in=500, thin=5, seed=3)
    run_chain(data, data.dims(2, 2), cfg)
    dt = time.perf_counter() - t0
    print(f"1000 iterations, n=300, 10x10: {dt:.2f}s ({dt / 1000 * 1e3:.2f} ms/iter)")


if __name__ == "__main__":
    main()
