"""Compare the compiled and numpy kernels on the Monte Carlo hot loop.

    python benchmarks/bench_kernels.py [--trials 200] [--steps 20000]
"""

import argparse
import time

import numpy as np

from llrdetect import kernels
from llrdetect.montecarlo import error_rate_curve
from llrdetect.model import compose
from llrdetect.presets import get_preset


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(B, K, n, p, repeat):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((n, n)) * 0.2
    C = rng.standard_normal((p, n))
    w = rng.standard_normal((B, K, n))
    v = rng.standard_normal((B, K, p))
    y = rng.standard_normal((B, K, p))
    D = np.eye(p)
    rows = []
    for name in ("python", "cython"):
        if name == "cython" and kernels.BACKEND != "cython":
            rows.append((name, None, None))
            continue
        x = rng.standard_normal((B, n))
        tp = best_of(lambda: kernels.propagate(A, C, x, w, v, backend=name), repeat)
        ta = best_of(lambda: kernels.accumulate_llr(y, D, 0.1, np.zeros(B), backend=name), repeat)
        rows.append((name, tp, ta))
    return rows


def bench_pipeline(trials, steps):
    pre = get_preset("pendulum")
    d = pre.defaults
    truth = compose(pre.model, pre.basis, d["gamma"])
    out = {}
    for name in ("python", "cython"):
        if name == "cython" and kernels.BACKEND != "cython":
            continue
        t0 = time.perf_counter()
        error_rate_curve(truth, pre.model, pre.basis, d["alpha"], d["beta"], trials, steps, threads=1, backend=name)
        out[name] = time.perf_counter() - t0
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"default backend: {kernels.BACKEND}")
    print(f"{'backend':8s} {'propagate':>12s} {'accumulate':>12s}   (50 x 4096 steps, n=4, p=2)")
    for name, tp, ta in bench_kernels(50, 4096, 4, 2, args.repeat):
        if tp is None:
            print(f"{name:8s} {'n/a':>12s} {'n/a':>12s}")
        else:
            print(f"{name:8s} {tp * 1e3:10.1f}ms {ta * 1e3:10.1f}ms")
    res = bench_pipeline(args.trials, args.steps)
    print(f"pendulum error-rate curve, {args.trials} trials x {args.steps} steps, 1 thread:")
    for name, t in res.items():
        print(f"  {name:8s} {t:8.2f} s")
    if len(res) == 2:
        print(f"  speedup  {res['python'] / res['cython']:8.1f}x")


if __name__ == "__main__":
    main()
