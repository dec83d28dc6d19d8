"""Compare the compiled and pure-NumPy kernel backends.

    python benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 3]
"""

import argparse
import time

import numpy as np

from tvselect import _backend


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(n, rng):
    g = rng.random((n, n))
    alpha = np.full((n, n), 0.1)
    p = rng.standard_normal((2, n, n))

    def cp():
        u = g.copy()
        _backend.kernels.cp_denoise(g, alpha, u, u.copy(), np.zeros((2, n, n)), 0.35, 0.35, 1.0, 50, 0.0)

    def l1():
        u = g.copy()
        _backend.kernels.l1tv_denoise(g, alpha * 1e-2, 1e-2, u, np.zeros((2, n, n)), 0.35, 0.35, 1.0, 10, 0.0, 5, 0.0)

    return {
        "gradient": lambda: _backend.kernels.gradient(g),
        "divergence": lambda: _backend.kernels.divergence(p),
        "box_sum(11)": lambda: _backend.kernels.box_sum(g, 5),
        "cp_denoise x50": cp,
        "l1tv_denoise 10x5": l1,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["python"]
    try:
        _backend.use("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled backend unavailable; timing the Python kernels only")
    print(f"{'kernel':<20}{'n':>6}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    rng = np.random.default_rng(0)
    for n in args.sizes:
        fns = cases(n, rng)
        for name, fn in fns.items():
            times = []
            for b in backends:
                _backend.use(b)
                times.append(_time(fn, args.repeat))
            row = f"{name:<20}{n:>6}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
            if len(times) == 2:
                row += f"{times[1] / times[0]:>11.1f}x"
            print(row)
    _backend.use(backends[0])


if __name__ == "__main__":
    main()
