"""Timing comparison of the two factorization kernels.

The solver spends its time in symmetric-indefinite factor/solve pairs on
small dense saddle-point matrices, called once or twice per iteration
from a sequential loop; this script times both kernel implementations on
that exact shape of work and reports per-call microseconds.

Run from the repo root:

    python3 benchmarks/bench_backends.py [--repeats 2000]
"""

import argparse
import time

import numpy as np

from stosqp import backend
from stosqp import _kernels_py

try:
    from stosqp import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

# (n, m) grid spanning the problem sizes the acceptance runs use
SIZES = [(4, 1), (6, 2), (10, 3), (20, 5), (40, 10)]


def _kkt_matrix(rng, n, m):
    a = rng.standard_normal((n, n))
    H = a @ a.T / n + 0.5 * np.eye(n)
    J = rng.standard_normal((m, n))
    K = np.zeros((n + m, n + m))
    K[:n, :n] = H
    K[n:, :n] = J
    K[:n, n:] = J.T
    return K


def _time_per_call(fn, repeats):
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats * 1e6


def bench_kernels(kernels, K, rhs, repeats):
    factor_us = _time_per_call(lambda: kernels.ldl_factor(K.copy()), repeats)
    lf, ipiv, info = kernels.ldl_factor(K.copy())
    assert info == 0
    solve_us = _time_per_call(lambda: kernels.ldl_solve(lf, ipiv, rhs), repeats)
    return factor_us, solve_us


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=2000, help="calls per timing loop")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print("active backend: %s" % backend.BACKEND)
    if _kernels_c is None:
        print("compiled kernels unavailable; timing the pure kernels only")

    header = "%-10s %14s %14s %14s %14s %8s" % (
        "(n, m)",
        "factor pure",
        "factor comp",
        "solve pure",
        "solve comp",
        "speedup",
    )
    print(header)
    print("-" * len(header))
    for n, m in SIZES:
        K = _kkt_matrix(rng, n, m)
        rhs = rng.standard_normal(n + m)
        f_py, s_py = bench_kernels(_kernels_py, K, rhs, args.repeats)
        if _kernels_c is None:
            print("%-10s %12.1fus %14s %12.1fus %14s %8s" % ((n, m), f_py, "-", s_py, "-", "-"))
            continue
        f_c, s_c = bench_kernels(_kernels_c, K, rhs, args.repeats)
        # cross-check both kernels agree before trusting the timings
        z_py = _kernels_py.ldl_solve(*_kernels_py.ldl_factor(K.copy())[:2], rhs)
        z_c = _kernels_c.ldl_solve(*_kernels_c.ldl_factor(K.copy())[:2], rhs)
        assert np.allclose(z_py, z_c, rtol=1e-9, atol=1e-12)
        speedup = (f_py + s_py) / (f_c + s_c)
        print(
            "%-10s %12.1fus %12.1fus %12.1fus %12.1fus %7.1fx"
            % ((n, m), f_py, f_c, s_py, s_c, speedup)
        )


if __name__ == "__main__":
    main()
