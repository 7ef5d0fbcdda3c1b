"""Time each hot kernel under the numba and pure-numpy backends.

    python benchmarks/bench_kernels.py [--iters 50] [--csv kernels.csv]

Both backends run single-threaded on identical float32 inputs shaped like
the training workload (batch of 16).  Outputs are cross-checked before timing.
"""
import argparse
import csv
import sys
import time

import numpy as np
from threadpoolctl import threadpool_limits

from dctpatch import _kernels


def cases(rng):
    f32 = np.float32
    x1 = rng.standard_normal((16, 1, 32, 32)).astype(f32)
    w1 = rng.standard_normal((6, 1, 5, 5)).astype(f32)
    b1 = rng.standard_normal(6).astype(f32)
    d1 = rng.standard_normal((16, 6, 28, 28)).astype(f32)
    x2 = rng.standard_normal((16, 6, 14, 14)).astype(f32)
    w2 = rng.standard_normal((16, 6, 5, 5)).astype(f32)
    b2 = rng.standard_normal(16).astype(f32)
    d2 = rng.standard_normal((16, 16, 10, 10)).astype(f32)
    pool_in = rng.standard_normal((16, 6, 28, 28)).astype(f32)
    pool_d = rng.standard_normal((16, 6, 14, 14)).astype(f32)
    t = rng.standard_normal((32, 32))
    patches = rng.random((16, 32, 32))
    a = rng.standard_normal((16, 1024)).astype(f32)
    w = rng.standard_normal((1024, 350)).astype(f32)
    basis = rng.standard_normal((1024, 1024))
    vec = rng.random(1024)
    return {
        "conv1_forward": lambda k: k.conv2d_forward(x1, w1, b1),
        "conv1_backward": lambda k: k.conv2d_backward(d1, x1, w1),
        "conv2_forward": lambda k: k.conv2d_forward(x2, w2, b2),
        "conv2_backward": lambda k: k.conv2d_backward(d2, x2, w2),
        "maxpool_forward": lambda k: k.maxpool2x2_forward(pool_in),
        "maxpool_backward": lambda k: k.maxpool2x2_backward(pool_d, k.maxpool2x2_forward(pool_in)[1]),
        "separable_dct_batch": lambda k: k.separable_batch(t, patches),
        "dct_direct_8x8": lambda k: k.dct_direct(patches[0, :8, :8]),
        "linear_matmul": lambda k: k.matmul(a, w),
        "dense_matvec": lambda k: k.matvec(basis, vec),
    }


def median_us(fn, iters, warmup=3):
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(iters):
        start = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - start)
    return float(np.median(samples)) / 1e3


def _flat(result):
    return result if isinstance(result, tuple) else (result,)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iters", type=int, default=50)
    parser.add_argument("--csv")
    args = parser.parse_args(argv)

    if _kernels.numba_kernels is None:
        print("numba backend unavailable (disabled or not installed)", file=sys.stderr)
        return 1
    backends = {"numpy": _kernels.numpy_kernels, "numba": _kernels.numba_kernels}
    rows = []
    with threadpool_limits(limits=1):
        for name, fn in cases(np.random.default_rng(0)).items():
            ref, got = _flat(fn(backends["numpy"])), _flat(fn(backends["numba"]))
            gap = max(float(np.max(np.abs(np.asarray(r, float) - np.asarray(g, float)))) for r, g in zip(ref, got))
            times = {b: median_us(lambda: fn(k), args.iters) for b, k in backends.items()}
            rows.append((name, times["numpy"], times["numba"], times["numpy"] / times["numba"], gap))
            print(f"{name:22s} numpy={times['numpy']:10.1f}us numba={times['numba']:10.1f}us "
                  f"ratio={times['numpy'] / times['numba']:6.2f} max_gap={gap:.1e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kernel", "numpy_us", "numba_us", "numpy_over_numba", "max_abs_gap"])
            writer.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
