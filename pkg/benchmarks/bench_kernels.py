"""Time the compiled and pure-numpy kernels on representative inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

The first compiled call (JIT or cache load) is excluded from the timings.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from ssrkit import kernels
from ssrkit._accel import HAVE_NUMBA


def chain_case(rng, scale):
    n, steps, c = int(20_000 * scale), 50, 9
    k = rng.random((steps, c, c)) + np.eye(c) * 5
    cum = np.cumsum(k / k.sum(axis=1, keepdims=True), axis=1)
    args = (cum, np.ones((steps, c), dtype=bool), rng.integers(0, c, n), rng.random((n, steps)))
    return f"sample_chain ({n} paths x {steps} steps, {c} cells)", kernels.sample_chain, args


def positions_case(rng, scale):
    n, steps, grid = int(5_000 * scale), 200, 256
    v = np.sin(np.linspace(0, 6, grid))[None, :] * np.linspace(0.5, 1.5, steps + 1)[:, None]
    args = (rng.uniform(0.5, 11.0, n), v, 0.0, 12.0 / (grid - 1), 0.005, False)
    return f"integrate_positions ({n} particles x {steps} steps)", kernels.integrate_positions, args


def flash_case(rng, scale):
    n, steps, d, X = int(2_000 * scale), 100, 9, 2
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    w_step = np.eye(d) * 0.99 + 0.002 * a
    w_half = np.eye(d) * 0.995 + 0.001 * a
    roots = np.array([np.diag(rng.random(d)) for _ in range(X)]).astype(complex)
    phi0 = np.ones(d, complex) / np.sqrt(d)
    args = (w_step, w_half, roots, phi0, rng.random((n, steps, 2)), 64)
    return f"sample_flash_steps ({n} histories x {steps} steps, dim {d})", kernels.sample_flash_steps, args


def best_time(fn, args, use_numba, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args, use_numba=use_numba)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--scale", type=float, default=1.0, help="multiplies the ensemble sizes")
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':58s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")
    for case in (chain_case, positions_case, flash_case):
        label, fn, fargs = case(rng, args.scale)
        t_np = best_time(fn, fargs, False, args.repeat)
        if HAVE_NUMBA:
            fn(*fargs, use_numba=True)
            t_nb = best_time(fn, fargs, True, args.repeat)
            print(f"{label:58s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{label:58s} {t_np:10.4f} {'n/a':>10s} {'':>8s}")


if __name__ == "__main__":
    main()
