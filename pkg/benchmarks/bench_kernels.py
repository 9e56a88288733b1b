"""Timing of the compiled kernels against the numpy reference.

    python3 benchmarks/bench_kernels.py [--sizes 129 257 513] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from scforge import _kernels_py as ref

try:
    from scforge import _kernels as compiled
except ImportError:
    compiled = None


def cases(n):
    rng = np.random.default_rng(0)
    M = rng.normal(size=(n, n))
    a, b = rng.normal(size=n), rng.normal(size=n)
    b[0] = a[0]
    f = rng.normal(size=(n, n, 4, 4))
    h = 1.0 / (n - 1)
    return {
        "goursat_march": lambda mod: mod.goursat_march(M, a, b, h, h),
        "cumquad4": lambda mod: mod.cumquad4(f, h),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[129, 257, 513])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    print(f"{'kernel':<15}{'n':>6}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for n in args.sizes:
        for name, call in cases(n).items():
            t_py = min(timeit.repeat(lambda: call(ref), number=1, repeat=args.repeat)) * 1e3
            if compiled is None:
                print(f"{name:<15}{n:>6}{t_py:>14.2f}{'n/a':>16}{'':>10}")
                continue
            t_c = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<15}{n:>6}{t_py:>14.2f}{t_c:>16.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
