"""Time the compiled kernels against the pure-Python reference.

    python benchmarks/bench_kernels.py [--samples N] [--height H] [--steps S]

Both backends produce bit-identical results; this only compares speed.
"""
import argparse
import time

import numpy as np

from treequench import _backend
from treequench.rules import Mutation, Standard, kernel_params
from treequench.sim import leaf_cdf
from treequench.simplex import make_distribution


def timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def bench_map(mod, steps):
    x = np.array([0.3, 0.3, 0.4])
    code, q, arity, table = kernel_params(Mutation(0.5), 2)
    out = np.empty((1, 3))
    return timed(lambda: mod.run_map(x, out, code, q, arity, table, steps, 0.0))


def bench_sampler(mod, rules, samples, height):
    d0 = make_distribution(2, [0.36, 0.34, 0.30])
    code, q, arity, table = kernel_params(rules, 2)
    counts = np.zeros(3, dtype=np.int64)
    return timed(lambda: mod.sample_counts(leaf_cdf(d0), code, q, arity, table, 2, height,
                                           0, 0, samples, counts))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--height", type=int, default=10)
    ap.add_argument("--steps", type=int, default=100_000)
    args = ap.parse_args()
    mods = [_backend.pure] + ([_backend.compiled] if _backend.compiled else [])
    print(f"{'kernel':<28}" + "".join(f"{m.BACKEND:>12}" for m in mods) + f"{'speedup':>10}")
    rows = [
        (f"run_map x{args.steps}", lambda m: bench_map(m, args.steps)),
        (f"sample standard h{args.height} x{args.samples}",
         lambda m: bench_sampler(m, Standard(), args.samples, args.height)),
        (f"sample mutation h{args.height} x{args.samples}",
         lambda m: bench_sampler(m, Mutation(0.75), args.samples, args.height)),
    ]
    for name, fn in rows:
        times = [fn(m) for m in mods]
        speed = f"{times[0] / times[-1]:>9.0f}x" if len(times) > 1 else ""
        print(f"{name:<28}" + "".join(f"{t:>11.3f}s" for t in times) + speed)


if __name__ == "__main__":
    main()
