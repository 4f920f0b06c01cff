"""Benchmark the compiled conv kernels against the numpy fallback.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from motionduet._kernels import _ref

try:
    from motionduet._kernels import _fast
except ImportError:
    _fast = None


def bench(fn, *args, repeats=30):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    cases = [
        ("training step shape", 32, 64, 32, 5),
        ("sampling batch shape", 256, 64, 32, 5),
        ("long sequence", 8, 1024, 64, 9),
    ]
    print(f"{'case':<22} {'B':>4} {'T':>5} {'D':>4} {'K':>3} "
          f"{'numpy fwd':>11} {'compiled fwd':>13} {'speedup':>8}   "
          f"{'numpy bwd':>11} {'compiled bwd':>13} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for name, b, t, d, k in cases:
        x = rng.normal(size=(b, t, d))
        kern = rng.normal(size=(k, d))
        gy = rng.normal(size=(b, t, d))
        ref_f = bench(_ref.conv1d_same_fwd, x, kern)
        ref_b = bench(_ref.conv1d_same_bwd, x, kern, gy)
        if _fast is None:
            print(f"{name:<22} {b:>4} {t:>5} {d:>4} {k:>3} "
                  f"{ref_f*1e3:>9.3f}ms {'n/a':>13} {'n/a':>8}   "
                  f"{ref_b*1e3:>9.3f}ms {'n/a':>13} {'n/a':>8}")
            continue
        fast_f = bench(_fast.conv1d_same_fwd, x, kern)
        fast_b = bench(_fast.conv1d_same_bwd, x, kern, gy)
        assert np.allclose(_fast.conv1d_same_fwd(x, kern),
                           _ref.conv1d_same_fwd(x, kern), atol=1e-10)
        print(f"{name:<22} {b:>4} {t:>5} {d:>4} {k:>3} "
              f"{ref_f*1e3:>9.3f}ms {fast_f*1e3:>11.3f}ms {ref_f/fast_f:>7.2f}x   "
              f"{ref_b*1e3:>9.3f}ms {fast_b*1e3:>11.3f}ms {ref_b/fast_b:>7.2f}x")


if __name__ == "__main__":
    main()
