"""Time the numba kernels against the pure numpy/Python fallback.

Run:  python benchmarks/bench_kernels.py [--quick]
The environment flag SCHN_NUMBA=0 switches the whole package to the fallback
path; this script times both implementations directly in one process.
"""

import argparse
import time

import numpy as np

from schn import _kernels as K


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_sweep(quick):
    side = 33 if quick else 65
    sweeps = 20 if quick else 200
    rng = np.random.default_rng(0)
    ys, xs = np.meshgrid(np.arange(1, side - 1), np.arange(1, side - 1),
                         indexing="ij")
    ys = ys.ravel().astype(np.int64)
    xs = xs.ravel().astype(np.int64)
    ptab = 1.0 / (1.0 + np.exp(-2.0 * np.arange(-4, 5, dtype=float)))
    g = -np.ones((side, side), dtype=np.int8)
    u = rng.random(ys.size)

    def run(fn):
        for _ in range(sweeps):
            fn(g, ys, xs, ptab, u)

    return ("heatbath sweep", sweeps * ys.size,
            timeit(run, K._heatbath_sweep_nb) if K.HAVE_NUMBA else None,
            timeit(run, K._heatbath_sweep_py))


def bench_gray(quick):
    n = 16 if quick else 20
    offsets = np.arange(0, 2 * n + 1, 2, dtype=np.int64)
    nbrs = np.array([(i + 1) % n for i in range(n) for _ in (0, 1)],
                    dtype=np.int64)
    field = np.full(n, -2, dtype=np.int64)
    args = (n, offsets, nbrs, field, 0.8)
    return ("gray partition", 1 << n,
            timeit(K._gray_partition_nb, *args) if K.HAVE_NUMBA else None,
            timeit(K._gray_partition_py, *args, repeat=1))


def bench_saw(quick):
    cutoff = 14 if quick else 18
    args = (0, 1, 6, 2, 0, 6, 0, cutoff + 4, cutoff, 1.5, 0.6, True, -1, -1)
    return ("saw enumeration", None,
            timeit(K._saw_counts_nb, *args) if K.HAVE_NUMBA else None,
            timeit(K._saw_counts_py, *args, repeat=1))


def bench_ballot(quick):
    N = 128 if quick else 512
    thetas = np.repeat(np.arange(1, 31, dtype=np.int64), 41)
    zetas = np.tile(np.arange(-20, 21, dtype=np.int64), 30)
    w = 0.5 ** (thetas - 1) * np.exp(-0.7 * np.abs(zetas))
    probs = w / w.sum()
    cap = int(4 * np.sqrt(N))
    args = (N, 1, thetas, zetas, probs, cap)
    return ("ballot dp", N * cap * thetas.size,
            timeit(K._ballot_dp_nb, *args) if K.HAVE_NUMBA else None,
            timeit(K._ballot_dp_np, *args))


def bench_trace(quick):
    side = 33 if quick else 65
    reps = 50 if quick else 500
    rng = np.random.default_rng(3)
    g = rng.choice(np.array([-1, 1], dtype=np.int8), size=(side, side))
    g[0, :] = g[-1, :] = g[:, 0] = g[:, -1] = -1
    hdis = g[:, :-1] != g[:, 1:]
    vdis = g[:-1, :] != g[1:, :]

    def run(fn):
        for _ in range(reps):
            fn(hdis, vdis, 0, 0)

    return ("loop tracing", reps,
            timeit(run, K._trace_loops_nb) if K.HAVE_NUMBA else None,
            timeit(run, K._trace_loops_py, repeat=2))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true",
                    help="small sizes (used by the test suite)")
    args = ap.parse_args()
    K.warmup()
    rows = [bench_sweep(args.quick), bench_gray(args.quick),
            bench_saw(args.quick), bench_ballot(args.quick),
            bench_trace(args.quick)]
    print(f"{'kernel':<18} {'numba':>12} {'fallback':>12} {'speedup':>9}")
    for name, _, t_nb, t_py in rows:
        nb = f"{t_nb * 1e3:9.2f} ms" if t_nb is not None else "      n/a"
        ratio = f"{t_py / t_nb:8.1f}x" if t_nb else "     n/a"
        print(f"{name:<18} {nb:>12} {t_py * 1e3:9.2f} ms {ratio:>9}")


if __name__ == "__main__":
    main()
