"""Time the numpy and numba kernel backends against each other.

Run:  python benchmarks/bench_kernels.py [--size 2000x64] [--repeats 200]

Also times one full ODE-net training step under each backend; the active
backend for a real run is picked at import time (IMDELAB_NO_NUMBA=1
forces numpy).
"""

import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from imdelab import kernels  # noqa: E402


def bench(fn, *args, repeats=200):
    fn(*args)  # warm up / compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats * 1e6


def kernel_table(shape, repeats):
    rng = np.random.default_rng(0)
    x = rng.normal(size=shape)
    g = rng.normal(size=shape)
    y = kernels.NUMPY_IMPLS["sigmoid_fwd"](x)
    cases = {
        "sigmoid_fwd": (x,),
        "sigmoid_bwd": (g, y),
        "tanh_bwd": (g, y),
        "sqdiff_sum": (x, g),
    }
    print(f"kernel timings, shape {shape}, {repeats} repeats "
          f"(active backend: {kernels.BACKEND})")
    print(f"{'kernel':14s} {'numpy (us)':>12s} {'numba (us)':>12s} {'speedup':>9s}")
    for name, args in cases.items():
        t_np = bench(kernels.NUMPY_IMPLS[name], *args, repeats=repeats)
        if kernels.NUMBA_IMPLS is None:
            print(f"{name:14s} {t_np:12.1f} {'n/a':>12s} {'n/a':>9s}")
            continue
        t_nb = bench(kernels.NUMBA_IMPLS[name], *args, repeats=repeats)
        print(f"{name:14s} {t_np:12.1f} {t_nb:12.1f} {t_np / t_nb:8.2f}x")
    for impls, label in ((kernels.NUMPY_IMPLS, "numpy"),
                         (kernels.NUMBA_IMPLS, "numba")):
        if impls is None:
            continue
        p = x.copy()
        m = np.zeros_like(p)
        v = np.zeros_like(p)
        t = bench(impls["adam_update"], p, g, m, v,
                  1e-3, 0.9, 0.999, 1e-8, 1.0, 1.0, repeats=repeats)
        print(f"{'adam_update':14s} {label:>7s} {t:12.1f} us")


def train_step_timing(repeats):
    from imdelab.problems import problem
    from imdelab.discovery import make_dataset, train, TrainConfig
    from imdelab.nn import LrSchedule

    do = problem("damped-oscillator")
    ds = make_dataset(do.field, "domain", 0.04, 2000, box=do.box, seed=1)
    cfg = TrainConfig(model="odenet", widths=(2, 64, 2), activation="sigmoid",
                      schedule=LrSchedule("constant", 1e-4, 1e-4, repeats),
                      updates=repeats, batch=2000, seed=0,
                      method="euler", h=0.02, s=2)
    t0 = time.perf_counter()
    train(cfg, ds)
    dt = (time.perf_counter() - t0) / repeats * 1e3
    print(f"full ODE-net update ({kernels.BACKEND} backend): {dt:.2f} ms")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", default="2000x64")
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()
    shape = tuple(int(s) for s in args.size.split("x"))
    kernel_table(shape, args.repeats)
    train_step_timing(max(50, args.repeats // 2))


if __name__ == "__main__":
    main()
