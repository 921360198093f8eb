#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-Python fallback.

Two parts: per-kernel microbenchmarks (both modules imported side by
side) and an end-to-end training epoch run in subprocesses so the
``HYPENT_BACKEND`` selection happens at import time, as in normal use.

    python3 benchmarks/backend_bench.py [--quick]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from hypent import _kernels_py as kpy

try:
    from hypent import _kernels_c as kc
except ImportError:
    kc = None


def time_call(fn, args, number):
    start = time.perf_counter()
    for _ in range(number):
        fn(*args)
    return (time.perf_counter() - start) / number


def micro(number):
    rng = np.random.default_rng(0)
    rows = []
    for dim in (5, 50):
        u = rng.uniform(-0.3, 0.3, dim)
        v = rng.uniform(-0.3, 0.3, dim)
        g = rng.normal(size=dim)
        w = kpy.mobius_add(1.0, u, v)
        feats = rng.normal(size=4 * dim + 2)
        W = rng.normal(size=(256, feats.shape[0]))
        b = rng.normal(size=256)
        gh = rng.normal(size=256)
        cases = [
            (f"mobius_add d={dim}", (1.0, u, v), "mobius_add"),
            (f"mobius_add_vjp d={dim}", (1.0, u, v, w, g), "mobius_add_vjp"),
            (f"mobius_scalar_mul d={dim}", (1.0, 0.5, v), "mobius_scalar_mul"),
            (f"hyp_dist d={dim}", (1.0, u, v), "hyp_dist"),
            (f"hyp_dist_vjp d={dim}", (1.0, u, v, 1.0), "hyp_dist_vjp"),
            (f"rsgd_update d={dim}", (1.0, u, g, 0.01), "rsgd_update"),
            (f"affine 256x{feats.shape[0]}", (W, b, feats), "affine"),
            (f"affine_vjp 256x{feats.shape[0]}", (W, feats, gh), "affine_vjp"),
        ]
        for name, args, attr in cases:
            t_py = time_call(getattr(kpy, attr), args, number)
            if kc is None:
                rows.append((name, t_py, None))
            else:
                t_c = time_call(getattr(kc, attr), args, number)
                rows.append((name, t_py, t_c))
    print(f"{'kernel':<28} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for name, t_py, t_c in rows:
        py_us = t_py * 1e6
        if t_c is None:
            print(f"{name:<28} {py_us:>10.2f}us {'n/a':>12} {'n/a':>9}")
        else:
            print(f"{name:<28} {py_us:>10.2f}us {t_c * 1e6:>10.2f}us {t_py / t_c:>8.1f}x")


TRAIN_SNIPPET = """
import time
from hypent import backend, data, engine
split, _ = data.gen_numbers(train_n={n}, val_n=200, test_n=200, seed=7)
cfg = engine.RunConfig(model="LMS_FFNN", dim={dim}, lr=0.01, epochs={epochs}, seed=3)
start = time.perf_counter()
engine.train(cfg, split)
print(f"{{backend.backend_name()}}: {{time.perf_counter() - start:.2f}}s "
      f"({n} samples x {epochs} epochs, dim {dim})")
"""


def end_to_end(n, epochs, dim):
    for backend in ("python", "compiled"):
        if backend == "compiled" and kc is None:
            print("compiled: extension not built, skipped")
            continue
        env = dict(os.environ, HYPENT_BACKEND=backend)
        code = TRAIN_SNIPPET.format(n=n, epochs=epochs, dim=dim)
        subprocess.run([sys.executable, "-c", code], env=env, check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller sizes")
    args = parser.parse_args()

    number = 2000 if args.quick else 20000
    print("== kernel microbenchmarks ==")
    micro(number)
    print("\n== end-to-end training (per-sample RSGD) ==")
    if args.quick:
        end_to_end(n=1000, epochs=2, dim=5)
    else:
        end_to_end(n=4000, epochs=5, dim=50)


if __name__ == "__main__":
    main()
