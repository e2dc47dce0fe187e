"""Compare the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--rows N] [--cols D] [--repeat K]

Reports per-call wall time for the epsilon streams and the shift-apply kernel
at an embedding-corpus scale, and verifies the two backends agree bit-for-bit.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sada._kernels import _numpy_impl

try:
    from sada._kernels import _fast
except ImportError:
    _fast = None


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=100_000)
    parser.add_argument("--cols", type=int, default=512)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    n = args.rows * args.cols
    gen = np.random.default_rng(0)
    base = gen.normal(size=(args.rows, args.cols))
    scale = np.abs(gen.normal(size=args.cols))
    eps = _numpy_impl.uniform_block(1, 0, n).reshape(args.rows, args.cols)

    backends = [("numpy", _numpy_impl)]
    if _fast is not None:
        backends.append(("compiled", _fast))
    else:
        print("compiled extension not built; benchmarking the fallback only")

    print(f"rows={args.rows} cols={args.cols} ({n / 1e6:.1f}M elements), best of {args.repeat}")
    results: dict[tuple[str, str], float] = {}
    for name, impl in backends:
        results[(name, "uniform")] = _time(lambda impl=impl: impl.uniform_block(7, 0, n), args.repeat)
        results[(name, "rademacher")] = _time(
            lambda impl=impl: impl.rademacher_block(7, 0, n), args.repeat
        )
        results[(name, "apply_shift")] = _time(
            lambda impl=impl: impl.apply_shift(base, eps, scale), args.repeat
        )

    for kernel in ("uniform", "rademacher", "apply_shift"):
        line = f"{kernel:12s}"
        for name, _ in backends:
            line += f"  {name}: {results[(name, kernel)] * 1e3:8.2f} ms"
        if _fast is not None:
            speedup = results[("numpy", kernel)] / results[("compiled", kernel)]
            line += f"  speedup: {speedup:5.2f}x"
        print(line)

    if _fast is not None:
        same = (
            _fast.uniform_block(7, 0, n).tobytes() == _numpy_impl.uniform_block(7, 0, n).tobytes()
            and _fast.rademacher_block(7, 0, n).tobytes()
            == _numpy_impl.rademacher_block(7, 0, n).tobytes()
            and _fast.apply_shift(base, eps, scale).tobytes()
            == _numpy_impl.apply_shift(base, eps, scale).tobytes()
        )
        print(f"backends bit-identical: {same}")


if __name__ == "__main__":
    main()
