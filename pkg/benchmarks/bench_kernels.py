"""Benchmark the compiled and pure-numpy kernel backends.

Times the training-shaped convolution/pooling workload and the
detection-shaped labelling workload.  The results justify the default
mixed selection in liqsense._kernels: BLAS-backed im2col wins the
batched convolutions, the compiled flood fill wins labelling.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from liqsense._kernels import pykernels

try:
    from liqsense._kernels import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, *args, repeat=30):
    fn(*args)  # warmup
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_backend(impl):
    rng = np.random.default_rng(0)
    # conv1 and conv2 of the patch classifier, training batch of 16
    x1 = rng.normal(size=(16, 1, 8, 8))
    w1 = rng.normal(size=(32, 1, 3, 3))
    b1 = np.zeros(32)
    dy1 = rng.normal(size=(16, 32, 8, 8))
    x2 = rng.normal(size=(16, 32, 4, 4))
    w2 = rng.normal(size=(64, 32, 3, 3))
    b2 = np.zeros(64)
    dy2 = rng.normal(size=(16, 64, 4, 4))
    pool_x = rng.normal(size=(16, 32, 8, 8))
    masks = [rng.random((32, 52)) < d for d in (0.05, 0.2, 0.5)]

    results = {
        "conv1 fwd": timeit(lambda: impl.conv2d_forward(x1, w1, b1)),
        "conv1 bwd": timeit(lambda: impl.conv2d_backward(x1, w1, dy1)),
        "conv2 fwd": timeit(lambda: impl.conv2d_forward(x2, w2, b2)),
        "conv2 bwd": timeit(lambda: impl.conv2d_backward(x2, w2, dy2)),
        "maxpool fwd": timeit(lambda: impl.maxpool2_forward(pool_x)),
        "label 32x52 x3": timeit(lambda: [impl.label_components(m) for m in masks]),
    }
    return results


def main():
    backends = [("python", pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled extension not built; timing the numpy backend only\n")

    tables = {name: bench_backend(impl) for name, impl in backends}
    kernels = list(next(iter(tables.values())))
    width = max(len(k) for k in kernels)
    header = f"{'kernel'.ljust(width)}  " + "  ".join(f"{n:>12}" for n in tables)
    if len(tables) == 2:
        header += f"  {'speedup c/py':>12}"
    print(header)
    print("-" * len(header))
    for kernel in kernels:
        row = f"{kernel.ljust(width)}  "
        row += "  ".join(f"{tables[n][kernel] * 1e6:>10.1f}us" for n in tables)
        if len(tables) == 2:
            ratio = tables["python"][kernel] / tables["cython"][kernel]
            row += f"  {ratio:>11.2f}x"
        print(row)
    if len(tables) == 2:
        print(
            "\nspeedup > 1 means the compiled kernel is faster; the default\n"
            "backend uses numpy for conv/pool and the compiled flood fill\n"
            "for labelling (see liqsense._kernels)."
        )


if __name__ == "__main__":
    main()
