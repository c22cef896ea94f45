"""Timing comparison: compiled kernels against their numpy fallbacks.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    E2CFD_NO_NUMBA=1 python3 benchmarks/bench_kernels.py   # fallback only

Each kernel is timed over identical inputs through the compiled entry
point and through the plain-python implementation behind it.  With
numba disabled (or missing) the two paths are the same function, which
the output says explicitly.
"""

import argparse
import time

import numpy as np

from e2cfd import _kernels as k


def bench(fn, args, repeats):
    fn(*args)  # warm-up: triggers compilation on the jitted path
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def make_cases(batch, rng):
    x = rng.standard_normal((batch, 64))
    w = rng.standard_normal((64, 64))
    b = rng.standard_normal(64)
    dz = rng.standard_normal((batch, 64))
    activation = np.tanh(rng.standard_normal((batch, 64)))
    param = rng.standard_normal(64 * 64)
    grad = rng.standard_normal(64 * 64)
    m = np.zeros_like(param)
    v = np.zeros_like(param)
    rewards = rng.standard_normal(batch)
    values = rng.standard_normal(batch + 1)
    return [
        ("dense_forward", k.dense_forward, (x, w, b)),
        ("dense_backward", k.dense_backward, (x, w, dz)),
        ("tanh_backward", k.tanh_backward, (activation, dz)),
        ("adam_step", k.adam_step,
         (param, grad, m, v, 1, 3e-4, 0.9, 0.999, 1e-8)),
        ("gae_scan", k.gae_scan, (rewards, values, 0.99, 0.95)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--batch", type=int, default=4096)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    cases = make_cases(args.batch, rng)

    if k.HAVE_NUMBA:
        print(f"numba active; batch={args.batch}, repeats={args.repeats}")
    else:
        print(
            "numba unavailable or disabled (E2CFD_NO_NUMBA); both columns "
            "time the numpy fallback"
        )
    header = f"{'kernel':<16}{'compiled ms':>12}{'fallback ms':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, fn, inputs in cases:
        compiled = bench(fn, inputs, args.repeats)
        fallback = bench(k.python_impl(fn), inputs, args.repeats)
        ratio = fallback / compiled if compiled > 0 else float("inf")
        print(
            f"{name:<16}{compiled * 1e3:>12.3f}{fallback * 1e3:>12.3f}"
            f"{ratio:>8.2f}x"
        )


if __name__ == "__main__":
    main()
