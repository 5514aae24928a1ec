"""Compare the compiled and pure-numpy top-k selection kernels.

The compiled kernel keeps a bounded heap (O(n log k)); the fallback sorts the
whole score vector (O(n log n)). Both must return identical indices, so this
script checks agreement on every instance before timing.

Usage: python3 benchmarks/bench_topk.py [--sizes 10000,100000,1000000]
       [--ks 10,100,1000] [--repeats 5] [--seed 0]
"""

from __future__ import annotations

import argparse
import importlib
import os
import sys
import time

import numpy as np


def _load_backends():
    os.environ["DRSELECT_PURE_PYTHON"] = "1"
    import drselect.kernels as kernels

    kernels = importlib.reload(kernels)
    if kernels.BACKEND != "python":
        raise RuntimeError("could not force the pure backend")
    pure = kernels.topk_indices

    os.environ["DRSELECT_PURE_PYTHON"] = "0"
    kernels = importlib.reload(kernels)
    compiled = kernels.topk_indices if kernels.BACKEND == "compiled" else None
    return compiled, pure


def _time(fn, scores, tie_rank, k: int, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(scores, tie_rank, k)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="10000,100000,1000000")
    parser.add_argument("--ks", default="10,100,1000")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    compiled, pure = _load_backends()
    if compiled is None:
        print("compiled kernel not built; showing the pure backend only")

    sizes = [int(s) for s in args.sizes.split(",")]
    ks = [int(s) for s in args.ks.split(",")]
    rng = np.random.default_rng(args.seed)

    header = f"{'n':>9}  {'k':>6}  {'pure (ms)':>10}"
    if compiled is not None:
        header += f"  {'compiled (ms)':>13}  {'speedup':>7}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        # Quantized scores force plenty of ties so tie handling is exercised.
        scores = rng.integers(0, n // 10 + 2, size=n).astype(np.float64)
        tie_rank = rng.permutation(n).astype(np.int64)
        for k in ks:
            t_pure = _time(pure, scores, tie_rank, k, args.repeats)
            line = f"{n:>9}  {k:>6}  {t_pure * 1e3:>10.3f}"
            if compiled is not None:
                got = compiled(scores, tie_rank, k)
                want = pure(scores, tie_rank, k)
                if not np.array_equal(got, want):
                    print(f"MISMATCH at n={n}, k={k}", file=sys.stderr)
                    return 1
                t_comp = _time(compiled, scores, tie_rank, k, args.repeats)
                line += f"  {t_comp * 1e3:>13.3f}  {t_pure / t_comp:>6.1f}x"
            print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
