"""Timing comparison of the compiled and pure-Python kernel backends.

Runs each hot kernel on identical inputs through ergodrift.kernels._ext
(when built) and ergodrift.kernels._purepy, reports best-of-N wall
times, and cross-checks the outputs.  Usage:

    python3 benchmarks/bench_kernels.py [--steps N] [--repeats R]
"""

import argparse
import time

import numpy as np

from ergodrift.kernels import _purepy
from ergodrift.matrices import GeneratorSystem
from ergodrift.shift import WordStream, mix64
from ergodrift.torus import fourier_grid

try:
    from ergodrift.kernels import _ext
except ImportError:
    _ext = None

PAIR = GeneratorSystem.from_matrices([[[2, 1], [1, 1]], [[1, 1], [0, 1]]])


def flatten(out) -> np.ndarray:
    parts = out if isinstance(out, tuple) else (out,)
    return np.concatenate([np.ravel(np.asarray(p, dtype=float)) for p in parts])


def best_of(repeats, fn, *args):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1_000_000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--k-max", type=int, default=5)
    args = ap.parse_args()

    gens = PAIR.float_generators()
    letters = WordStream(seed=mix64(0xBE7C), weights=PAIR.weights).letters(args.steps)
    x0 = np.array([0.4142135623730951, 0.7320508075688772])
    v0 = np.array([0.6, 0.8])
    v1 = np.array([-0.8, 0.6])
    kvecs = fourier_grid(2, args.k_max)
    # the Fourier kernel carries a per-mode trig update, so it gets a
    # shorter walk to keep the pure fallback run reasonable
    fsteps = max(args.steps // 5, 1)

    cases = [
        ("chain_logscale", lambda m: m.chain_logscale(gens, letters)),
        ("backward_increments", lambda m: m.backward_increments(gens, letters, v0, v1)),
        ("torus_walk_positions", lambda m: m.torus_walk_positions(gens, x0, letters)),
        (
            "torus_walk_fourier",
            lambda m: m.torus_walk_fourier(gens, x0, letters[:fsteps], kvecs, True),
        ),
    ]

    print(f"steps={args.steps} (fourier: {fsteps}), k_max={args.k_max}, "
          f"repeats={args.repeats}, best-of timing")
    if _ext is None:
        print("compiled extension not built; timing the pure backend only")
    header = f"{'kernel':<22} {'python':>10} {'cython':>10} {'speedup':>8}  agreement"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_py, out_py = best_of(args.repeats, call, _purepy)
        if _ext is None:
            print(f"{name:<22} {t_py:>9.3f}s {'-':>10} {'-':>8}")
            continue
        t_cy, out_cy = best_of(args.repeats, call, _ext)
        flat_py = flatten(out_py)
        flat_cy = flatten(out_cy)
        if np.array_equal(flat_py, flat_cy):
            agree = "bit-identical"
        else:
            worst = float(np.max(np.abs(flat_py - flat_cy)))
            agree = f"max |diff| {worst:.2e}"
        print(f"{name:<22} {t_py:>9.3f}s {t_cy:>9.3f}s {t_py / t_cy:>7.1f}x  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
