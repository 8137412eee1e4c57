"""Compare the compiled and pure-Python kernels on representative workloads.

    python benchmarks/bench_kernels.py [--repeat N]

Each workload is run on both backends; outputs are also checked for
bit-identity.
"""
import argparse
import timeit

import numpy as np

from viseq import _kernels_py

try:
    from viseq import _kernels
except ImportError:
    _kernels = None


def workloads():
    rng = np.random.default_rng(0)
    # stochastic approximation: 1e5 steps over a 31-entry response table
    u = rng.random(100_000)
    table = 0.3 + 0.2 * np.cos(np.arange(31) / 5.0)
    yield ("robbins_monro_table T=1e5", "robbins_monro_table",
           (u, table, 30, 0.5, 1.0, 10.0))
    # same with frame displays: 900 trials per draw
    table900 = 0.3 + 0.2 * np.cos(np.arange(901) / 150.0)
    yield ("robbins_monro_table T=2e4 n=900", "robbins_monro_table",
           (u[:20_000], table900, 900, 0.5, 1.0, 10.0))
    # bootstrap of one 900-choice cell, 1000 replications of 30
    x = (rng.random(900) < 0.3).astype(float)
    idx = rng.integers(0, 900, size=(1000, 30))
    yield ("resample_means 1000x30", "resample_means", (x, idx))
    idx_full = rng.integers(0, 900, size=(1000, 900))
    yield ("resample_means 1000x900", "resample_means", (x, idx_full))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'workload':<34}{'python s':>10}{'cython s':>10}{'speedup':>9}  identical")
    for label, fn, argv in workloads():
        py = getattr(_kernels_py, fn)
        t_py = min(timeit.repeat(lambda: py(*argv), number=1, repeat=args.repeat))
        if _kernels is None:
            print(f"{label:<34}{t_py:>10.4f}")
            continue
        cy = getattr(_kernels, fn)
        t_cy = min(timeit.repeat(lambda: cy(*argv), number=1, repeat=args.repeat))
        same = np.array_equal(np.asarray(py(*argv)), np.asarray(cy(*argv)))
        print(f"{label:<34}{t_py:>10.4f}{t_cy:>10.4f}{t_py / t_cy:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
