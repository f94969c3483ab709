"""Time the compiled kernels against their NumPy twins.

    python benchmarks/bench_kernels.py [--repeat 5] [--paths 20000]

Prints one row per kernel with the best-of-N wall time for each backend and
the speedup.  The two backends must return identical results; the script
checks that before timing.
"""
import argparse
import math
import sys
import timeit

import numpy as np

from shiryaev_qsd import _backend, sde

py = _backend.python_kernels
cy = _backend.compiled_kernels


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(args):
    z = np.linspace(0.01, 25.0, args.points)
    psi_a = -0.5772156649015329 - 2 * math.log(2)  # digamma(1/2)
    psi_1 = -0.5772156649015329
    cfg = sde.SimConfig(A=1.0, x0=2.0, dt=1e-3, horizon=args.horizon, n_paths=args.paths, seed=1)

    def sim(kern):
        return lambda: sde.simulate(cfg, backend=kern, workers=1).survivor_values

    return [
        ("kummer_series_array", lambda k: (lambda: k.kummer_series_array(-0.3, 1.7, z)[0])),
        ("tricomi_log_series_array", lambda k: (lambda: k.tricomi_log_series_array(0.5, z, psi_a, psi_1)[0])),
        ("simulate (1 worker)", lambda k: sim("python" if k is py else "cython")),
    ]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--points", type=int, default=2000, help="z grid size for the series kernels")
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--horizon", type=float, default=1.0)
    args = p.parse_args(argv)

    if cy is None:
        print("compiled kernels not built; only the NumPy backend is available", file=sys.stderr)
        return 1

    print(f"{'kernel':<28}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, make in cases(args):
        f_py, f_cy = make(py), make(cy)
        if not np.array_equal(f_py(), f_cy()):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        t_py, t_cy = _best(f_py, args.repeat), _best(f_cy, args.repeat)
        print(f"{name:<28}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
