"""Compare the numba kernels with their numpy twins.

Run:  python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is called through its explicit backend, so one process times
both.  Outputs are checked for byte equality before timing.
"""

import argparse
import time

import numpy as np

from ultraspec._kernels import assoc_concave, assoc_scan, legendre_m
from ultraspec.weights import make_weights


def best_of(fn, repeat):
    fn()  # warm-up (compilation for numba)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    w = make_weights("gevrey", 2, s=1.5)
    w.ensure(1 << 16)
    logr = np.log(np.logspace(-1, 3, 400))
    yield "assoc_scan   (400 r, s=1.5)", lambda b: assoc_scan(logr, 2, w.table, 1 << 15, 8, backend=b)

    f = make_weights("factorial", 2)
    f.ensure(1 << 22)
    big = np.log(np.linspace(10.0, 1e6, 4000))
    yield "assoc_concave(4000 r, s=1)", lambda b: assoc_concave(big, 2, f.table, 1 << 21, backend=b)

    x = np.cos(np.linspace(0.01, 3.13, 513))
    yield "legendre_m   (m=40, l<=600)", lambda b: legendre_m(40, 600, x, backend=b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<30}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, run in cases():
        a, b = run("numba"), run("numpy")
        pairs = zip(a, b) if isinstance(a, tuple) else [(a, b)]
        same = all(p.tobytes() == q.tobytes() for p, q in pairs)
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        t_nb = best_of(lambda: run("numba"), args.repeat)
        t_np = best_of(lambda: run("numpy"), args.repeat)
        print(f"{name:<30}{1e3 * t_nb:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_nb:>10.1f}x")


if __name__ == "__main__":
    main()
