"""Timing comparison of the compiled likelihood kernels vs the numpy path.

Run: python3 benchmarks/bench_kernels.py [--bank 200000] [--repeats 5]

Both backends are imported directly (bypassing the env-var switch) so one
process can time them side by side; agreement is checked before timing.
"""

import argparse
import time

import numpy as np

from designrl.kernels import BACKEND, pyref
from designrl.prob import make_rng

try:
    from designrl.kernels import _native
except ImportError:
    _native = None


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_loc(bank, repeats):
    rng = make_rng(0)
    K, d = 2, 2
    thetas = rng.standard_normal((bank, K, d))
    xi = rng.uniform(-4, 4, d)
    y = 0.3
    args = (y, thetas, xi, 1.0, 0.1, 1e-4, 0.5)
    rows = [("location python", time_call(lambda: pyref.loc_loglik_batch(*args), repeats))]
    if _native is not None:
        ref = pyref.loc_loglik_batch(*args)
        out = _native.loc_loglik_batch(*args)
        assert np.allclose(out, ref, rtol=1e-12, atol=1e-12)
        rows.append(("location native", time_call(
            lambda: _native.loc_loglik_batch(*args), repeats)))
    return rows


def bench_ces(bank, repeats):
    rng = make_rng(1)
    rho = rng.uniform(0.02, 0.98, bank)
    alphas = rng.dirichlet([1.0, 1.0, 1.0], bank)
    u = rng.lognormal(1.0, 3.0, bank)
    xi = rng.uniform(0.0, 100.0, 6)
    y = 0.73
    args = (y, rho, alphas, u, xi, 0.005, 2.0 ** -22)
    rows = [("ces python", time_call(lambda: pyref.ces_loglik_batch(*args), repeats))]
    if _native is not None:
        ref = pyref.ces_loglik_batch(*args)
        out = _native.ces_loglik_batch(*args)
        assert np.allclose(out, ref, rtol=1e-10, atol=1e-10)
        rows.append(("ces native", time_call(
            lambda: _native.ces_loglik_batch(*args), repeats)))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--bank", type=int, default=200_000,
                    help="contrastive bank rows per call")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    print(f"default backend: {BACKEND}")
    print(f"bank size: {args.bank}, best of {args.repeats}\n")
    rows = bench_loc(args.bank, args.repeats) + bench_ces(args.bank, args.repeats)
    base = {}
    for name, secs in rows:
        prob, kind = name.split()
        if kind == "python":
            base[prob] = secs
        rate = args.bank / secs / 1e6
        speedup = f"  ({base[prob] / secs:.2f}x)" if kind == "native" else ""
        print(f"{name:18s} {secs * 1e3:8.2f} ms   {rate:7.1f} M rows/s{speedup}")
    if _native is None:
        print("\ncompiled extension not available; showing python path only")


if __name__ == "__main__":
    main()
